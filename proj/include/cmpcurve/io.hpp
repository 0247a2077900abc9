#pragma once

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "cmpcurve/analysis.hpp"
#include "cmpcurve/core_model.hpp"
#include "cmpcurve/error.hpp"
#include "cmpcurve/simgen.hpp"

namespace cmpcurve {

struct CsvDataset {
    Dataset data;
    std::vector<std::string> covariate_names;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const std::size_t comma = line.find(',', start);
        out.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

inline std::string where(std::size_t line_no) { return "line " + std::to_string(line_no) + ": "; }

inline double parse_double(std::string_view s, std::size_t line_no, std::string_view column) {
    double v = 0.0;
    if (s.empty()) throw Error(ErrorCode::Parse, where(line_no) + "empty value in column '" + std::string(column) + "'");
    if (s.front() == '+') s.remove_prefix(1);
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw Error(ErrorCode::Parse, where(line_no) + "cannot read '" + std::string(s) + "' in column '" +
                                          std::string(column) + "' as a number");
    return v;
}

inline int parse_status(std::string_view s, std::size_t line_no) {
    int v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || ptr != s.data() + s.size())
        throw Error(ErrorCode::Parse, where(line_no) + "status '" + std::string(s) + "' is not an integer");
    return v;
}

inline std::string fmt6(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", x);
    return buf;
}

}  // namespace detail

/// Reads `time,status,<covariates...>` with a header row. Blank lines and lines
/// starting with '#' are skipped. The result is validated.
inline CsvDataset read_dataset_csv(std::istream& in, std::optional<int> declared_k = std::nullopt) {
    std::string line;
    std::size_t line_no = 0;
    std::vector<std::string> header;
    while (std::getline(in, line)) {
        ++line_no;
        const auto t = detail::trim(line);
        if (t.empty() || t.front() == '#') continue;
        for (auto f : detail::split_fields(t)) header.emplace_back(f);
        break;
    }
    if (header.empty()) throw Error(ErrorCode::EmptyInput, "no header row");
    if (header.size() < 2 || header[0] != "time" || header[1] != "status")
        throw Error(ErrorCode::Parse, detail::where(line_no) + "header must start with 'time,status'");

    CsvDataset out;
    out.covariate_names.assign(header.begin() + 2, header.end());
    std::vector<SubjectRecord> raw;
    while (std::getline(in, line)) {
        ++line_no;
        const auto t = detail::trim(line);
        if (t.empty() || t.front() == '#') continue;
        const auto fields = detail::split_fields(t);
        if (fields.size() != header.size())
            throw Error(ErrorCode::Parse, detail::where(line_no) + "expected " + std::to_string(header.size()) +
                                              " fields, found " + std::to_string(fields.size()));
        SubjectRecord r;
        r.y = detail::parse_double(fields[0], line_no, header[0]);
        r.event = detail::parse_status(fields[1], line_no);
        r.z.reserve(fields.size() - 2);
        for (std::size_t j = 2; j < fields.size(); ++j) r.z.push_back(detail::parse_double(fields[j], line_no, header[j]));
        raw.push_back(std::move(r));
    }
    if (raw.empty()) throw Error(ErrorCode::EmptyInput, "no data rows");
    out.data = validate_dataset(raw, declared_k);
    return out;
}

inline CsvDataset read_dataset_csv(const std::string& path, std::optional<int> declared_k = std::nullopt) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open '" + path + "'");
    return read_dataset_csv(in, declared_k);
}

/// Writes a dataset in the same layout read_dataset_csv accepts, with full
/// round-trip precision.
inline void write_dataset_csv(std::ostream& out, const Dataset& ds, const std::vector<std::string>& names = {}) {
    out << "time,status";
    for (std::size_t j = 0; j < ds.d; ++j) out << ',' << (j < names.size() ? names[j] : "z" + std::to_string(j + 1));
    out << '\n';
    char buf[40];
    for (const auto& r : ds.records) {
        std::snprintf(buf, sizeof buf, "%.17g", r.y);
        out << buf << ',' << r.event;
        for (double z : r.z) {
            std::snprintf(buf, sizeof buf, "%.17g", z);
            out << ',' << buf;
        }
        out << '\n';
    }
}

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL) {
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t x) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(x));
    return buf;
}

inline std::string read_file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Output tables. Each starts with a '#' line naming the manifest of the run.

inline constexpr const char* kCurveColumns = "v,r_hat,se,ci_lo,ci_hi";
inline constexpr const char* kInverseColumns = "p,proportion,se,ci_lo,ci_hi";
inline constexpr const char* kTrueCurveColumns = "v,r_true";
inline constexpr const char* kStudyColumns = "setting,param,n,metric,point,truth,mean,bias,ese,ase,cp,replicates_used";

inline void write_provenance(std::ostream& out, std::string_view manifest_ref) {
    if (!manifest_ref.empty()) out << "# " << manifest_ref << '\n';
}

inline void write_curve_csv(std::ostream& out, const CurveEstimate& c, std::string_view manifest_ref = {}) {
    using detail::fmt6;
    write_provenance(out, manifest_ref);
    out << kCurveColumns << '\n';
    for (std::size_t g = 0; g < c.v_grid.size(); ++g) {
        out << fmt6(c.v_grid[g]) << ',' << fmt6(c.r_hat[g]);
        if (c.se) out << ',' << fmt6((*c.se)[g]) << ',' << fmt6((*c.ci_lo)[g]) << ',' << fmt6((*c.ci_hi)[g]);
        else out << ",,,";
        out << '\n';
    }
}

inline void write_inverse_csv(std::ostream& out, const InverseEstimate& inv, std::string_view manifest_ref = {}) {
    using detail::fmt6;
    write_provenance(out, manifest_ref);
    out << kInverseColumns << '\n';
    const auto& p = inv.curve.p_grid;
    for (std::size_t j = 0; j < p.size(); ++j) {
        out << fmt6(p[j]) << ',' << fmt6(inv.curve.proportion[j]);
        if (j < inv.se.size()) out << ',' << fmt6(inv.se[j]) << ',' << fmt6(inv.ci_lo[j]) << ',' << fmt6(inv.ci_hi[j]);
        else out << ",,,";
        out << '\n';
    }
}

inline void write_true_curve_csv(std::ostream& out, const TrueCurve& tc, std::string_view manifest_ref = {}) {
    using detail::fmt6;
    write_provenance(out, manifest_ref);
    out << kTrueCurveColumns << '\n';
    for (std::size_t g = 0; g < tc.v_grid.size(); ++g) out << fmt6(tc.v_grid[g]) << ',' << fmt6(tc.r_true[g]) << '\n';
}

/// One row per (metric, evaluation point), like the Bias/ESE/ASE/CP tables.
/// `metric` filters to "rv" or "rinv"; empty keeps both.
inline void write_study_csv(std::ostream& out, const StudyReport& rep, std::string_view metric = {},
                            std::string_view manifest_ref = {}) {
    using detail::fmt6;
    write_provenance(out, manifest_ref);
    out << kStudyColumns << '\n';
    for (const auto& r : rep.rows) {
        if (!metric.empty() && r.metric != metric) continue;
        out << r.setting << ',' << to_string(r.parameterization) << ',' << r.n << ',' << r.metric << ',' << fmt6(r.point)
            << ',' << fmt6(r.truth) << ',' << fmt6(r.truth + r.bias) << ',' << fmt6(r.bias) << ',' << fmt6(r.ese) << ','
            << fmt6(r.ase) << ',' << fmt6(r.cp) << ',' << r.replicates_used << '\n';
    }
}

}  // namespace cmpcurve
