use serde::{Deserialize, Serialize};

use super::Method;

/// One completed acquisition. Field order and names are the trial-log schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub method: Method,
    pub block: u8,
    pub trial: usize,
    #[serde(rename = "dir")]
    pub direction: u8,
    #[serde(rename = "D_m")]
    pub distance: f64,
    #[serde(rename = "W_m")]
    pub width: f64,
    #[serde(rename = "id")]
    pub id_value: f64,
    #[serde(rename = "id_cat")]
    pub id_category: u8,
    #[serde(rename = "mt_s")]
    pub movement_time: f64,
    pub misses: u32,
    pub hit: bool,
    pub seed: u64,
    pub subject: u32,
}

impl TrialRecord {
    pub const COLUMNS: [&'static str; 13] =
        ["method", "block", "trial", "dir", "D_m", "W_m", "id", "id_cat", "mt_s", "misses", "hit", "seed", "subject"];
}
