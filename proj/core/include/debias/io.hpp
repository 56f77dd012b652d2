#pragma once

#include <string>

#include "debias/linalg.hpp"

namespace debias {

// Round-trip-exact CSV (17 significant digits).
void save_matrix_csv(const Matrix& m, const std::string& path);

// Empty file -> 0 x 0 matrix.
Matrix load_matrix_csv(const std::string& path);

std::string format_double(double v);

}  // namespace debias
