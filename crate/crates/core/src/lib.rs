//! Evaluation toolkit for medical video question answering.
//!
//! Scores video-retrieval runs (MAP, P@k, R@k, nDCG), temporal answer
//! localization (IoU, mIoU, R@n,IoU=mu), and instructional step captioning
//! (greedy step alignment, relaxed IoU, BLEU/ROUGE-L/METEOR). It also builds
//! assessment pools from runs and ships a BM25 subtitle-search baseline.
//!
//! All math is generic over [`Scalar`] (`f32` or `f64`). The `*64` / `*32`
//! aliases below fix the scalar for callers that do not care.

pub mod bm25;
pub mod error;
pub mod io;
pub mod model;
pub mod pooling;
pub mod report;
pub mod retrieval;
pub mod scalar;
pub mod segment;
pub mod steps;
pub mod text;

pub use error::{Error, Result};
pub use model::{
    format_timestamp, intersection_length, parse_timestamp, union_length, QuestionId,
    RelevanceGrade, TimeInterval, VideoId,
};
pub use report::{write_report, MetricReport, ReportFormat};
pub use scalar::Scalar;

pub type TimeInterval64 = model::TimeInterval<f64>;
pub type TimeInterval32 = model::TimeInterval<f32>;

pub type RetrievalRun64 = io::RetrievalRun<f64>;
pub type RetrievalRun32 = io::RetrievalRun<f32>;
pub type Qrels64 = io::Qrels<f64>;
pub type Qrels32 = io::Qrels<f32>;
pub type JudgedVideo64 = io::JudgedVideo<f64>;
pub type LocalizationRun64 = io::LocalizationRun<f64>;
pub type LocalizationRun32 = io::LocalizationRun<f32>;
pub type LocalizationCandidate64 = io::LocalizationCandidate<f64>;
pub type StepSequence64 = io::StepSequence<f64>;
pub type StepSequence32 = io::StepSequence<f32>;

pub type RetrievalScore64 = retrieval::RetrievalScore<f64>;
pub type LocalizationScore64 = segment::LocalizationScore<f64>;
pub type IoUParams64 = segment::IoUParams<f64>;
pub type AlignmentParams64 = steps::AlignmentParams<f64>;
pub type AlignmentParams32 = steps::AlignmentParams<f32>;
pub type AlignmentResult64 = steps::AlignmentResult<f64>;
pub type Bm25Params64 = bm25::Bm25Params<f64>;
pub type Bm25Params32 = bm25::Bm25Params<f32>;
