//! Inter-rater agreement and the hypothesis tests used to characterise a
//! rated dataset.

mod agreement;
mod hypothesis;

use serde::{Deserialize, Serialize};

pub use agreement::{cohen_kappa, fleiss_kappa, fleiss_tallies, krippendorff_alpha, DistanceMetric};
pub use hypothesis::{bh_fdr, pearson_r, wilcoxon_rank_sum, wilcoxon_rank_sum_with, WilcoxonMethod};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgreementMethod {
    KrippendorffAlphaOrdinal,
    KrippendorffAlphaInterval,
    FleissKappa,
    CohenKappa,
}

impl AgreementMethod {
    pub fn name(self) -> &'static str {
        match self {
            AgreementMethod::KrippendorffAlphaOrdinal => "krippendorff_alpha_ordinal",
            AgreementMethod::KrippendorffAlphaInterval => "krippendorff_alpha_interval",
            AgreementMethod::FleissKappa => "fleiss_kappa",
            AgreementMethod::CohenKappa => "cohen_kappa",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgreementResult {
    pub statistic: f64,
    pub method: AgreementMethod,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestMethod {
    WilcoxonRankSum,
    PearsonR,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
    pub method: TestMethod,
}
