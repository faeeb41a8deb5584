#pragma once

// Analyst-facing CSV: one row per session that completed round 1.

#include <span>
#include <string>
#include <string_view>

#include "mma/session.hpp"

namespace mma {

inline constexpr std::string_view kCsvHeader =
    "session_id,condition,seed,n_observations,pre_recall,pre_precision,pre_relation_acc,pre_composite,"
    "post_recall,post_precision,post_relation_acc,post_composite,delta_composite,pred_acc_pre,pred_acc_post,"
    "completed";

/// Rounded to 4 decimals, then the shortest decimal that round-trips ("1.0", "0.6667").
std::string format_metric(double v);

/// RFC 4180: quoted only when the field holds a comma, quote, CR or LF.
std::string csv_field(std::string_view s);

std::string csv_row(const SessionReport& report);

/// Header plus rows, LF line endings.
std::string csv_document(std::span<const SessionReport> reports);

}  // namespace mma
