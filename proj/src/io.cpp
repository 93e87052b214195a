#include "pinv/io.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "pinv/error.hpp"

namespace pinv {

static_assert(std::endian::native == std::endian::little, "binary artifacts assume a little-endian host");

namespace {

std::string hex(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%a", v);
    return buf;
}

double parse_real(const std::string& token, const std::string& path) {
    char* end = nullptr;
    const double v = std::strtod(token.c_str(), &end);
    if (end == token.c_str() || *end != '\0') throw ConfigError(path, "bad number '" + token + "' in header");
    return v;
}

std::ifstream open_in(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError(path, "cannot open");
    return in;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError(path, "cannot write");
    return out;
}

void expect(std::istream& header, const std::string& word, const std::string& path) {
    std::string got;
    if (!(header >> got) || got != word) throw ConfigError(path, "expected '" + word + "' in header");
}

template <class T>
T read_token(std::istream& header, const std::string& path) {
    T v{};
    if (!(header >> v)) throw ConfigError(path, "truncated header");
    return v;
}

void write_values(std::ostream& out, std::span<const double> values) {
    out.write(reinterpret_cast<const char*>(values.data()), static_cast<std::streamsize>(values.size() * sizeof(double)));
}

std::vector<double> read_values(std::istream& in, std::size_t n, const std::string& path) {
    std::vector<double> v(n);
    in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
    if (static_cast<std::size_t>(in.gcount()) != n * sizeof(double)) throw ConfigError(path, "truncated data");
    in.peek();
    if (!in.eof()) throw ConfigError(path, "trailing data");
    return v;
}

std::string grid_header(const Grid& g) {
    const Domain& d = g.domain();
    return "dim " + std::to_string(d.dim) + " level " + std::to_string(g.level()) + " lower " + hex(d.lower[0]) + " " +
           hex(d.lower[1]) + " upper " + hex(d.upper[0]) + " " + hex(d.upper[1]) + " count " +
           std::to_string(g.node_count());
}

Grid read_grid(std::istream& header, const std::string& path) {
    Domain d;
    expect(header, "dim", path);
    d.dim = read_token<int>(header, path);
    expect(header, "level", path);
    const int level = read_token<int>(header, path);
    expect(header, "lower", path);
    d.lower[0] = parse_real(read_token<std::string>(header, path), path);
    d.lower[1] = parse_real(read_token<std::string>(header, path), path);
    expect(header, "upper", path);
    d.upper[0] = parse_real(read_token<std::string>(header, path), path);
    d.upper[1] = parse_real(read_token<std::string>(header, path), path);
    try {
        const Grid grid(d, level);
        expect(header, "count", path);
        if (read_token<std::size_t>(header, path) != grid.node_count()) throw ConfigError(path, "node count mismatch");
        return grid;
    } catch (const InvalidArgument& e) {
        throw ConfigError(path, e.what());
    }
}

std::istringstream header_line(std::istream& in, const std::string& magic, const std::string& path) {
    std::string line;
    if (!std::getline(in, line)) throw ConfigError(path, "empty file");
    std::istringstream header(line);
    expect(header, magic, path);
    expect(header, "1", path);
    return header;
}

}  // namespace

void write_field(const std::string& path, const GridFunction& a) {
    std::ofstream out = open_out(path);
    out << "pinv-field 1 " << grid_header(a.grid()) << '\n';
    write_values(out, a.values());
}

GridFunction read_field(const std::string& path) {
    std::ifstream in = open_in(path);
    std::istringstream header = header_line(in, "pinv-field", path);
    const Grid grid = read_grid(header, path);
    return GridFunction(grid, read_values(in, grid.node_count(), path));
}

void write_coefficients(const std::string& path, const CoefficientTree& c) {
    std::ofstream out = open_out(path);
    out << "pinv-coefficients 1 dim " << c.dim() << " max_level " << c.max_level() << " counts";
    for (int l = -1; l <= c.max_level(); ++l) out << ' ' << c.count(l);
    out << '\n';
    write_values(out, c.flat());
}

CoefficientTree read_coefficients(const std::string& path) {
    std::ifstream in = open_in(path);
    std::istringstream header = header_line(in, "pinv-coefficients", path);
    expect(header, "dim", path);
    const int dim = read_token<int>(header, path);
    expect(header, "max_level", path);
    const int level = read_token<int>(header, path);
    if ((dim != 1 && dim != 2) || level < -1 || level > 20) throw ConfigError(path, "bad tree shape");
    expect(header, "counts", path);
    std::size_t total = 0;
    for (int l = -1; l <= level; ++l) {
        const std::size_t n = read_token<std::size_t>(header, path);
        if (n != CoefficientTree::level_count(dim, l)) throw ConfigError(path, "level count mismatch");
        total += n;
    }
    const std::vector<double> values = read_values(in, total, path);
    return CoefficientTree::from_flat(dim, level, values);
}

void write_observation(const std::string& path, const Observation& obs) {
    std::ofstream out = open_out(path);
    const std::string id = obs.truth_id.empty() ? "-" : obs.truth_id;
    if (id.find_first_of(" \n") != std::string::npos) throw InvalidArgument("truth id must not contain spaces");
    out << "pinv-observation 1 eps " << hex(obs.eps) << " truth " << id << ' ' << grid_header(obs.y.grid()) << '\n';
    write_values(out, obs.y.values());
}

Observation read_observation(const std::string& path) {
    std::ifstream in = open_in(path);
    std::istringstream header = header_line(in, "pinv-observation", path);
    expect(header, "eps", path);
    const double eps = parse_real(read_token<std::string>(header, path), path);
    expect(header, "truth", path);
    std::string id = read_token<std::string>(header, path);
    const Grid grid = read_grid(header, path);
    Observation obs{GridFunction(grid, read_values(in, grid.node_count(), path)), eps, id == "-" ? "" : id};
    return obs;
}

std::string csv_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    // shortest representation that reads back to the same double
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

CsvWriter::CsvWriter(const std::string& path, std::vector<std::string> columns)
    : path_(path), out_(path, std::ios::trunc), columns_(columns.size()) {
    if (!out_) throw ConfigError(path, "cannot write");
    row(columns);
    rows_ = 0;
}

void CsvWriter::row(const std::vector<std::string>& cells) {
    if (cells.size() != columns_) throw InvalidArgument("csv row width does not match the header of " + path_);
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (cells[i].find_first_of(",\n") != std::string::npos) {
            throw InvalidArgument("csv cell contains a separator: " + cells[i]);
        }
        out_ << (i ? "," : "") << cells[i];
    }
    out_ << '\n';
    ++rows_;
}

}  // namespace pinv
