#pragma once

#include <string>

#include "internal/format.hpp"
#include "maskedge/harness.hpp"

namespace maskedge::internal {

inline std::string train_record_csv_line(const TrainRecord& r) {
  std::string line;
  line += std::to_string(r.step);
  line += ',';
  line += std::to_string(r.seed);
  line += ',';
  line += r.config_id;
  line += ',';
  line += format_double(r.loss_mask);
  line += ',';
  line += format_double(r.loss_edge);
  line += ',';
  line += format_double(r.loss_total);
  line += ',';
  if (r.eval_mean_iou) line += format_double(*r.eval_mean_iou);
  line += ',';
  if (r.eval_mean_bce) line += format_double(*r.eval_mean_bce);
  return line;
}

}  // namespace maskedge::internal
