#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "tsnca/pipeline.hpp"
#include "tsnca/train.hpp"

namespace tsnca {

// Shortest round-trippable decimal; "inf" / "-inf" / "nan" for non-finite.
std::string format_number(double v);
double parse_number(const std::string& text);

// name,status,psnr,ssim,rmse,uqi,srer,sam,angular_mean,angular_median,delta_e
// One row per image, then a "mean" row. Failed rows carry "error: <reason>"
// in the status column and empty metric fields.
void write_metric_csv(std::ostream& os, const EvaluationReport& report);

// step,<term...>,total
void write_loss_log_header(std::ostream& os, const std::vector<std::string>& terms);
void write_loss_log_row(std::ostream& os, const LossLogRow& row);
void write_loss_log(std::ostream& os, const std::vector<LossLogRow>& rows);

}  // namespace tsnca
