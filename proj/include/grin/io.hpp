#pragma once

#include <charconv>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "grin/controls.hpp"
#include "grin/errors.hpp"
#include "grin/potentials.hpp"
#include "grin/spectral.hpp"

namespace grin::io {

// Shortest decimal string that parses back to the same double; always '.'.
inline std::string format_double(double v) {
    char buf[32];
    const auto r = std::to_chars(buf, buf + sizeof(buf), v);
    if (r.ec != std::errc()) throw InternalError("format_double: conversion failed");
    return std::string(buf, r.ptr);
}

inline double parse_double(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size())
        throw ContractError("malformed number '" + std::string(s) + "'");
    return v;
}

inline std::vector<std::string_view> split(std::string_view line, char sep = ',') {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const std::size_t pos = line.find(sep, start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

// Writes to a sibling temporary file, then renames over the target.
inline void write_text_atomic(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
        f.write(content.data(), static_cast<std::streamsize>(content.size()));
        f.flush();
        if (!f) throw std::runtime_error("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

inline std::string read_text(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ContractError("cannot open " + path.string());
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

inline std::vector<std::string_view> lines_of(std::string_view text) {
    std::vector<std::string_view> out;
    for (std::string_view l : split(text, '\n')) {
        if (!l.empty() && l.back() == '\r') l.remove_suffix(1);
        if (!l.empty()) out.push_back(l);
    }
    return out;
}

// Parses a CSV with a fixed header into numeric columns.
inline std::vector<RealVector> read_columns(const std::filesystem::path& path, std::string_view header) {
    const std::string text = read_text(path);
    const auto lines = lines_of(text);
    if (lines.empty() || lines.front() != header)
        throw ContractError(path.string() + ": expected header '" + std::string(header) + "'");
    const std::size_t ncol = split(header).size();
    std::vector<RealVector> cols(ncol);
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto cells = split(lines[i]);
        if (cells.size() != ncol)
            throw ContractError(path.string() + ": line " + std::to_string(i + 1) + " has the wrong column count");
        for (std::size_t c = 0; c < ncol; ++c) cols[c].push_back(parse_double(cells[c]));
    }
    return cols;
}

// ---- fields: x, re, im, intensity ----

inline std::string field_csv(const Grid1D& grid, std::span<const cplx> f) {
    require(f.size() == grid.n(), "field_csv: field does not match grid");
    std::string out = "x,re,im,intensity\n";
    for (std::size_t j = 0; j < f.size(); ++j) {
        out += format_double(grid.x(j)) + ',' + format_double(f[j].real()) + ',' + format_double(f[j].imag()) +
               ',' + format_double(f[j].real() * f[j].real() + f[j].imag() * f[j].imag()) + '\n';
    }
    return out;
}

inline void check_abscissa(const RealVector& x, const Grid1D& grid, const std::string& what) {
    if (x.size() != grid.n()) throw ContractError(what + ": has " + std::to_string(x.size()) +
                                                  " rows, grid has " + std::to_string(grid.n()));
    const double tol = 1e-9 * std::max(1.0, grid.length());
    for (std::size_t j = 0; j < x.size(); ++j)
        if (std::abs(x[j] - grid.x(j)) > tol) throw ContractError(what + ": x column does not match the grid");
}

inline Field read_field_csv(const std::filesystem::path& path, const Grid1D& grid) {
    const auto cols = read_columns(path, "x,re,im,intensity");
    check_abscissa(cols[0], grid, path.string());
    Field f(grid.n());
    for (std::size_t j = 0; j < f.size(); ++j) f[j] = cplx(cols[1][j], cols[2][j]);
    return f;
}

// Infers the grid from a field file (x_min = first x, n = rows, dx = spacing).
inline Grid1D grid_from_field_csv(const std::filesystem::path& path) {
    const auto cols = read_columns(path, "x,re,im,intensity");
    const auto n = cols[0].size();
    if (n < 8) throw ContractError(path.string() + ": too few rows for a grid");
    const double dx = cols[0][1] - cols[0][0];
    return Grid1D(cols[0][0], cols[0][0] + dx * static_cast<double>(n), n);
}

// ---- potentials: x, value ----

inline std::string potential_csv(const Grid1D& grid, std::span<const double> v) {
    require(v.size() == grid.n(), "potential_csv: potential does not match grid");
    std::string out = "x,value\n";
    for (std::size_t j = 0; j < v.size(); ++j) out += format_double(grid.x(j)) + ',' + format_double(v[j]) + '\n';
    return out;
}

inline PotentialSamples read_potential_csv(const std::filesystem::path& path, const Grid1D& grid) {
    const auto cols = read_columns(path, "x,value");
    check_abscissa(cols[0], grid, path.string());
    return PotentialSamples{cols[1]};
}

// ---- controls: z, u, v ----

inline std::string control_csv(const Control& u, const Control& v) {
    require(u.axial() == v.axial(), "control_csv: controls on different grids");
    std::string out = "z,u,v\n";
    for (std::size_t k = 0; k < u.axial().n_samples(); ++k)
        out += format_double(u.axial().z(k)) + ',' + format_double(u.samples()[k]) + ',' +
               format_double(v.samples()[k]) + '\n';
    return out;
}

struct ControlPair {
    Control u;
    Control v;
};

inline ControlPair read_control_csv(const std::filesystem::path& path, const AxialGrid& axial) {
    const auto cols = read_columns(path, "z,u,v");
    if (cols[0].size() != axial.n_samples())
        throw ContractError(path.string() + ": sample count does not match the axial grid");
    const double tol = 1e-9 * std::max(1.0, std::abs(axial.z1()));
    for (std::size_t k = 0; k < cols[0].size(); ++k)
        if (std::abs(cols[0][k] - axial.z(k)) > tol)
            throw ContractError(path.string() + ": z column does not match the axial grid");
    return ControlPair{Control(axial, cols[1]), Control(axial, cols[2])};
}

// ---- histories: iter, objective, infidelity, tikhonov ----

struct HistoryRow {
    double objective;
    double infidelity;
    double tikhonov;
};

inline std::string history_csv(const std::vector<HistoryRow>& rows) {
    std::string out = "iter,objective,infidelity,tikhonov\n";
    for (std::size_t i = 0; i < rows.size(); ++i)
        out += std::to_string(i) + ',' + format_double(rows[i].objective) + ',' +
               format_double(rows[i].infidelity) + ',' + format_double(rows[i].tikhonov) + '\n';
    return out;
}

inline std::vector<HistoryRow> read_history_csv(const std::filesystem::path& path) {
    const auto cols = read_columns(path, "iter,objective,infidelity,tikhonov");
    std::vector<HistoryRow> rows(cols[0].size());
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = {cols[1][i], cols[2][i], cols[3][i]};
    return rows;
}

// ---- (x, z) matrices: one row per z-slice, header with the grid ----

struct Matrix {
    std::size_t nx = 0;
    std::size_t nz = 0;
    double x0 = 0.0;
    double dx = 0.0;
    double z0 = 0.0;
    double dz = 0.0;
    RealVector values;  // values[k * nx + j]
};

inline std::string matrix_csv(const Matrix& m) {
    require(m.values.size() == m.nx * m.nz, "matrix_csv: size mismatch");
    std::string out = "# nx=" + std::to_string(m.nx) + " nz=" + std::to_string(m.nz) +
                      " x0=" + format_double(m.x0) + " dx=" + format_double(m.dx) +
                      " z0=" + format_double(m.z0) + " dz=" + format_double(m.dz) + '\n';
    out.reserve(out.size() + m.values.size() * 24);
    for (std::size_t k = 0; k < m.nz; ++k) {
        for (std::size_t j = 0; j < m.nx; ++j) {
            if (j) out += ',';
            out += format_double(m.values[k * m.nx + j]);
        }
        out += '\n';
    }
    return out;
}

inline Matrix read_matrix_csv(const std::filesystem::path& path) {
    const std::string text = read_text(path);
    const auto lines = lines_of(text);
    if (lines.empty() || !lines.front().starts_with("# "))
        throw ContractError(path.string() + ": missing matrix header");
    Matrix m;
    bool seen[6] = {};
    for (std::string_view tok : split(lines.front().substr(2), ' ')) {
        const std::size_t eq = tok.find('=');
        if (eq == std::string_view::npos) throw ContractError(path.string() + ": malformed matrix header");
        const std::string_view key = tok.substr(0, eq);
        const std::string_view val = tok.substr(eq + 1);
        if (key == "nx") { m.nx = static_cast<std::size_t>(parse_double(val)); seen[0] = true; }
        else if (key == "nz") { m.nz = static_cast<std::size_t>(parse_double(val)); seen[1] = true; }
        else if (key == "x0") { m.x0 = parse_double(val); seen[2] = true; }
        else if (key == "dx") { m.dx = parse_double(val); seen[3] = true; }
        else if (key == "z0") { m.z0 = parse_double(val); seen[4] = true; }
        else if (key == "dz") { m.dz = parse_double(val); seen[5] = true; }
        else throw ContractError(path.string() + ": unknown matrix header key");
    }
    for (bool s : seen)
        if (!s) throw ContractError(path.string() + ": incomplete matrix header");
    if (lines.size() != m.nz + 1)
        throw ContractError(path.string() + ": expected " + std::to_string(m.nz) + " rows, found " +
                            std::to_string(lines.size() - 1));
    m.values.reserve(m.nx * m.nz);
    for (std::size_t k = 0; k < m.nz; ++k) {
        const auto cells = split(lines[k + 1]);
        if (cells.size() != m.nx)
            throw ContractError(path.string() + ": row " + std::to_string(k + 1) + " has the wrong length");
        for (auto c : cells) m.values.push_back(parse_double(c));
    }
    return m;
}

inline Matrix to_matrix(const TabulatedTimeline& v, const Grid1D& grid) {
    return Matrix{v.n_x, v.axial.n_samples(), grid.x_min(), grid.dx(), v.axial.z0(), v.axial.dz(), v.values};
}

// Rebuilds a tabulated timeline, checking the header against the grid.
inline TabulatedTimeline timeline_from_matrix(const Matrix& m, const Grid1D& grid, const std::string& what) {
    const double tol = 1e-9 * std::max(1.0, grid.length());
    if (m.nx != grid.n() || std::abs(m.x0 - grid.x_min()) > tol || std::abs(m.dx - grid.dx()) > tol)
        throw ContractError(what + ": matrix x-grid does not match the grid");
    if (m.nz < 2) throw ContractError(what + ": need at least two z-slices");
    const double z1 = m.z0 + m.dz * static_cast<double>(m.nz - 1);
    return TabulatedTimeline(AxialGrid(m.z0, z1, m.nz - 1), m.nx, m.values);
}

}  // namespace grin::io
