#pragma once

namespace trialqc {

/// Day windows shared by the discrepancy rules and the corruption transforms
/// that are built to violate them.
struct Tolerances {
    int conmed_timing_days = 3;   // conmed start vs [AE start, AE end]
    int lab_match_days = 7;       // supporting lab used for severity grading
    int dose_change_days = 7;     // exposure change vs AE start
    int supporting_lab_days = 14; // any abnormal lab backing a lab-gradeable AE
    int causality_days = 14;      // toxicity onset after an exposure start
};

} // namespace trialqc
