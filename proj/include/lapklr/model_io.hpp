#pragma once

// Model file layout:
//
//   LAPKLR-MODEL 1
//   kernel <rbf|linear|polynomial>
//   gamma <double>
//   degree <int>
//   coef0 <double>
//   lambda1 <double>
//   lambda2 <double>
//   final_objective <double>
//   iterations <int>
//   rows <n>
//   cols <d>
//   payload f64le row-major support[n*d] theta[n]
//   end_header
//   <binary payload>
//
// Header doubles are written in shortest round-trip form. The payload holds
// n*d support-point values (row-major) followed by the n coefficients, each
// a little-endian IEEE-754 float64.

#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>
#include <string>

#include "lapklr/error.hpp"
#include "lapklr/format.hpp"
#include "lapklr/model.hpp"

namespace lapklr {

inline constexpr std::string_view kModelMagic = "LAPKLR-MODEL";
inline constexpr int kModelFormatVersion = 1;

inline void write_model(std::ostream& os, const TrainedModel& m) {
    if (!m.support_points) throw DataError("cannot serialize a model without support points");
    const Matrix& S = *m.support_points;
    if (S.rows() != m.theta.size())
        throw DataError("model theta length does not match support point count");
    os << kModelMagic << ' ' << kModelFormatVersion << '\n'
       << "kernel " << to_string(m.kernel.family) << '\n'
       << "gamma " << format_double(m.kernel.gamma) << '\n'
       << "degree " << m.kernel.degree << '\n'
       << "coef0 " << format_double(m.kernel.coef0) << '\n'
       << "lambda1 " << format_double(m.hyper.lambda1) << '\n'
       << "lambda2 " << format_double(m.hyper.lambda2) << '\n'
       << "final_objective " << format_double(m.final_objective) << '\n'
       << "iterations " << m.iterations << '\n'
       << "rows " << S.rows() << '\n'
       << "cols " << S.cols() << '\n'
       << "payload f64le row-major support[n*d] theta[n]\n"
       << "end_header\n";
    for (Index r = 0; r < S.rows(); ++r)
        for (Index c = 0; c < S.cols(); ++c) write_f64_le(os, S(r, c));
    for (Index i = 0; i < m.theta.size(); ++i) write_f64_le(os, m.theta(i));
    if (!os) throw DataError("failed writing model");
}

namespace detail {

/// Read "key value" lines up to end_header.
inline std::map<std::string, std::string> read_header(std::istream& is, std::string_view magic,
                                                      int version) {
    std::string line;
    if (!std::getline(is, line)) throw DataError("empty file");
    std::istringstream first(line);
    std::string got_magic;
    int got_version = 0;
    first >> got_magic >> got_version;
    if (got_magic != magic) throw DataError("not a " + std::string(magic) + " file");
    if (got_version != version)
        throw DataError("unsupported " + std::string(magic) + " version " +
                        std::to_string(got_version));
    std::map<std::string, std::string> fields;
    while (std::getline(is, line)) {
        if (line == "end_header") return fields;
        const auto sp = line.find(' ');
        if (sp == std::string::npos) throw DataError("malformed header line '" + line + "'");
        fields[line.substr(0, sp)] = line.substr(sp + 1);
    }
    throw DataError("missing end_header");
}

inline const std::string& field(const std::map<std::string, std::string>& h, const std::string& key) {
    const auto it = h.find(key);
    if (it == h.end()) throw DataError("header is missing '" + key + "'");
    return it->second;
}

inline double double_field(const std::map<std::string, std::string>& h, const std::string& key) {
    double v = 0.0;
    if (!parse_double(field(h, key), v)) throw DataError("header '" + key + "' is not a number");
    return v;
}

inline long long int_field(const std::map<std::string, std::string>& h, const std::string& key) {
    long long v = 0;
    if (!parse_int(field(h, key), v)) throw DataError("header '" + key + "' is not an integer");
    return v;
}

}  // namespace detail

inline TrainedModel read_model(std::istream& is) {
    const auto h = detail::read_header(is, kModelMagic, kModelFormatVersion);
    TrainedModel m;
    m.kernel.family = parse_kernel_family(detail::field(h, "kernel"));
    m.kernel.gamma = detail::double_field(h, "gamma");
    m.kernel.degree = static_cast<int>(detail::int_field(h, "degree"));
    m.kernel.coef0 = detail::double_field(h, "coef0");
    m.hyper.lambda1 = detail::double_field(h, "lambda1");
    m.hyper.lambda2 = detail::double_field(h, "lambda2");
    m.final_objective = detail::double_field(h, "final_objective");
    m.iterations = static_cast<int>(detail::int_field(h, "iterations"));
    const long long rows = detail::int_field(h, "rows");
    const long long cols = detail::int_field(h, "cols");
    if (rows < 1 || cols < 1) throw DataError("model has an empty support set");

    Matrix S(rows, cols);
    for (Index r = 0; r < rows; ++r)
        for (Index c = 0; c < cols; ++c) S(r, c) = read_f64_le(is);
    m.theta.resize(rows);
    for (Index i = 0; i < rows; ++i) m.theta(i) = read_f64_le(is);
    if (is.peek() != std::char_traits<char>::eof()) throw DataError("trailing bytes after model payload");
    m.support_points = std::make_shared<const Matrix>(std::move(S));
    m.kernel.validate();
    return m;
}

inline void save_model(const std::filesystem::path& path, const TrainedModel& m) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot open '" + path.string() + "' for writing");
    write_model(os, m);
}

inline TrainedModel load_model(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open model '" + path.string() + "'");
    try {
        return read_model(is);
    } catch (const DataError& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

}  // namespace lapklr
