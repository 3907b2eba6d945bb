#include "descsyn/io/report.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <stdexcept>

namespace descsyn {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace

double median(std::vector<double> values) {
  if (values.empty()) {
    throw std::invalid_argument("median: empty input");
  }
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  if (n % 2 == 1) return values[n / 2];
  return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

std::string write_report(const std::vector<EvalRow>& rows) {
  std::string out = "run_label,frame_id,trans_err_cm,rot_err_deg,inliers,converged,note\n";
  std::vector<std::string> labels;
  for (const auto& r : rows) {
    if (std::find(labels.begin(), labels.end(), r.run_label) == labels.end()) {
      labels.push_back(r.run_label);
    }
    out += r.run_label + "," + r.frame_id + "," + fmt(r.trans_err_cm) + "," +
           fmt(r.rot_err_deg) + "," + std::to_string(r.inliers) + "," +
           (r.converged ? "1" : "0") + ",\n";
  }

  for (const auto& label : labels) {
    std::vector<const EvalRow*> group;
    for (const auto& r : rows) {
      if (r.run_label == label) group.push_back(&r);
    }
    const std::size_t nonconverged =
        group.size() - static_cast<std::size_t>(std::count_if(
                           group.begin(), group.end(),
                           [](const EvalRow* r) { return r->converged; }));
    const bool exclude_nonconverged =
        nonconverged > 0 &&
        static_cast<double>(nonconverged) <
            0.05 * static_cast<double>(group.size());

    std::vector<double> trans, rot, inl;
    double trans_sum = 0, rot_sum = 0;
    std::size_t converged_count = 0;
    for (const EvalRow* r : group) {
      if (r->converged) ++converged_count;
      if (exclude_nonconverged && !r->converged) continue;
      trans.push_back(r->trans_err_cm);
      rot.push_back(r->rot_err_deg);
      inl.push_back(r->inliers);
      trans_sum += r->trans_err_cm;
      rot_sum += r->rot_err_deg;
    }
    std::string note;
    if (exclude_nonconverged) {
      note = "excluded_nonconverged=" + std::to_string(nonconverged);
    } else if (nonconverged > 0) {
      note = "flagged_nonconverged=" + std::to_string(nonconverged);
    }
    out += label + ",median," + fmt(median(trans)) + "," + fmt(median(rot)) +
           "," + fmt(median(inl)) + "," + std::to_string(converged_count) +
           "," + note + "\n";
    out += label + ",mean," + fmt(trans_sum / static_cast<double>(trans.size())) +
           "," + fmt(rot_sum / static_cast<double>(rot.size())) + "," +
           fmt(std::accumulate(inl.begin(), inl.end(), 0.0) /
               static_cast<double>(inl.size())) +
           "," + std::to_string(converged_count) + "," + note + "\n";
  }
  return out;
}

}  // namespace descsyn
