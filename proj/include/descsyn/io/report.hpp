#pragma once

#include <string>
#include <vector>

// CSV evaluation reports: one row per query frame plus median/mean summary
// rows per run label.

namespace descsyn {

struct EvalRow {
  std::string run_label;
  std::string frame_id;
  double trans_err_cm = 0;
  double rot_err_deg = 0;
  int inliers = 0;
  bool converged = false;
};

/// Midpoint convention: even counts average the two central order
/// statistics.
double median(std::vector<double> values);

/// Header row, the per-frame rows in input order, then per label (in first
/// appearance order) a median and a mean summary row. Non-converged frames
/// are excluded from the medians when they make up less than 5% of the
/// label's rows; otherwise every row counts and the summary is marked
/// flagged in the note column.
std::string write_report(const std::vector<EvalRow>& rows);

}  // namespace descsyn
