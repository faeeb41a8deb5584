#pragma once

#include <vector>

namespace mma {

/// Maximum-weight assignment on a rows x cols matrix (Kuhn-Munkres, O(n^3)).
/// Returns, for each row, the assigned column or -1. Zero-weight pairs may be
/// assigned; callers filter them.
std::vector<int> max_weight_assignment(const std::vector<std::vector<double>>& weight);

double assignment_total(const std::vector<std::vector<double>>& weight, const std::vector<int>& rows_to_cols);

}  // namespace mma
