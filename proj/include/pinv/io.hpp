#pragma once

#include <fstream>
#include <string>
#include <vector>

#include "pinv/grid.hpp"
#include "pinv/obsmodel.hpp"
#include "pinv/wavelet.hpp"

namespace pinv {

// Binary artifacts are one ASCII header line followed by little-endian
// doubles in node (or level) order:
//   pinv-field 1 dim <d> level <L> lower <a> <b> upper <c> <e> count <n>
//   pinv-coefficients 1 dim <d> max_level <J> counts <n_-1> ... <n_J>
//   pinv-observation 1 eps <eps> truth <id> dim ... (as for fields)
// Reals in headers are hexfloats so a round trip is exact.

void write_field(const std::string& path, const GridFunction& a);
GridFunction read_field(const std::string& path);

void write_coefficients(const std::string& path, const CoefficientTree& c);
CoefficientTree read_coefficients(const std::string& path);

void write_observation(const std::string& path, const Observation& obs);
Observation read_observation(const std::string& path);

/// Shortest decimal form that round-trips; "nan" and "inf" spelled out.
std::string csv_number(double v);

/// Comma-separated table with a fixed header.  Cells are written verbatim, so
/// they must not contain commas or newlines.
class CsvWriter {
public:
    CsvWriter(const std::string& path, std::vector<std::string> columns);

    void row(const std::vector<std::string>& cells);
    std::size_t rows() const { return rows_; }
    const std::string& path() const { return path_; }

private:
    std::string path_;
    std::ofstream out_;
    std::size_t columns_;
    std::size_t rows_ = 0;
};

}  // namespace pinv
