#pragma once

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "parobs/geometry.hpp"

// CSV serialization of sampled fields. Layout: header `t,x1,...,xn,value`,
// one node per line, row-major in time then space. Readers reject files
// whose node set does not tile a uniform grid. Writers are deterministic:
// shortest round-trip formatting, atomic replace (temp + rename).

namespace parobs {

namespace io_detail {

inline std::string format_double(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline void atomic_write(const std::filesystem::path& path, const std::string& content) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out << content;
    }
    std::filesystem::rename(tmp, path);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            cells.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    cells.push_back(cur);
    return cells;
}

inline double parse_double(const std::string& s, const char* what) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw std::runtime_error(std::string("CSV: malformed number in ") + what + ": '" + s + "'");
    }
}

// Distinct sorted coordinate values with a uniform-spacing check.
inline std::vector<double> uniform_levels(std::vector<double> vals, const char* what) {
    std::sort(vals.begin(), vals.end());
    std::vector<double> lv;
    for (double v : vals)
        if (lv.empty() || v - lv.back() > 1e-12 * std::max(1.0, std::abs(v)) + 1e-300)
            lv.push_back(v);
    if (lv.size() >= 3) {
        const double step = (lv.back() - lv.front()) / static_cast<double>(lv.size() - 1);
        for (std::size_t i = 0; i < lv.size(); ++i)
            if (std::abs(lv[i] - (lv.front() + step * static_cast<double>(i))) > 1e-9 * std::max(1.0, std::abs(step)))
                throw std::runtime_error(std::string("CSV: ") + what + " levels are not uniformly spaced");
    }
    return lv;
}

} // namespace io_detail

inline std::string field_to_csv(const ScalarField& u) {
    const GridSpec& g = u.grid;
    std::ostringstream out;
    out << "t";
    for (int a = 0; a < g.n; ++a) out << ",x" << (a + 1);
    out << ",value\n";
    std::vector<int> idx(g.n);
    for (int k = 0; k < g.nt(); ++k)
        for (std::size_t s = 0; s < g.slice_size(); ++s) {
            g.unflatten_spatial(s, idx);
            out << io_detail::format_double(g.t_of(k));
            for (int a = 0; a < g.n; ++a) out << ',' << io_detail::format_double(g.x_of(a, idx[a]));
            out << ',' << io_detail::format_double(u.at_flat(k, s)) << '\n';
        }
    return out.str();
}

inline void write_field_csv(const std::filesystem::path& path, const ScalarField& u) {
    io_detail::atomic_write(path, field_to_csv(u));
}

inline ScalarField field_from_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("CSV: empty input");
    const auto header = io_detail::split_csv_line(line);
    if (header.size() < 3 || header.front() != "t" || header.back() != "value")
        throw std::runtime_error("CSV: expected header t,x1,...,xn,value");
    const int n = static_cast<int>(header.size()) - 2;
    for (int a = 0; a < n; ++a)
        if (header[a + 1] != "x" + std::to_string(a + 1))
            throw std::runtime_error("CSV: expected header t,x1,...,xn,value");

    std::vector<double> ts;
    std::vector<std::vector<double>> xs(n);
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto cells = io_detail::split_csv_line(line);
        if (static_cast<int>(cells.size()) != n + 2)
            throw std::runtime_error("CSV: wrong column count in row");
        std::vector<double> row(n + 2);
        row[0] = io_detail::parse_double(cells[0], "t");
        for (int a = 0; a < n; ++a) row[a + 1] = io_detail::parse_double(cells[a + 1], "x");
        row[n + 1] = io_detail::parse_double(cells[n + 1], "value");
        ts.push_back(row[0]);
        for (int a = 0; a < n; ++a) xs[a].push_back(row[a + 1]);
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw std::runtime_error("CSV: no data rows");

    const auto tlv = io_detail::uniform_levels(ts, "time");
    std::vector<std::vector<double>> xlv(n);
    for (int a = 0; a < n; ++a)
        xlv[a] = io_detail::uniform_levels(xs[a], "spatial");
    if (tlv.size() < 2) throw std::runtime_error("CSV: need at least 2 time levels");
    for (int a = 0; a < n; ++a)
        if (xlv[a].size() < 2) throw std::runtime_error("CSV: need at least 2 nodes per axis");

    const double dt = (tlv.back() - tlv.front()) / static_cast<double>(tlv.size() - 1);
    const double h0 = (xlv[0].back() - xlv[0].front()) / static_cast<double>(xlv[0].size() - 1);
    std::vector<std::array<double, 2>> extent(n);
    for (int a = 0; a < n; ++a) {
        const double ha = (xlv[a].back() - xlv[a].front()) / static_cast<double>(xlv[a].size() - 1);
        if (std::abs(ha - h0) > 1e-9 * std::max(1.0, h0))
            throw std::runtime_error("CSV: spatial step differs between axes");
        extent[a] = {xlv[a].front(), xlv[a].back()};
    }
    GridSpec grid(extent, h0, {tlv.front(), tlv.back()}, dt);
    if (grid.node_count() != rows.size())
        throw std::runtime_error("CSV: node set does not tile a uniform grid");

    ScalarField u(grid);
    std::vector<char> seen(grid.node_count(), 0);
    std::vector<int> idx(n);
    for (const auto& row : rows) {
        const int k = static_cast<int>(std::llround((row[0] - grid.time[0]) / grid.dt));
        if (k < 0 || k >= grid.nt() || std::abs(grid.t_of(k) - row[0]) > 1e-9 * std::max(1.0, dt))
            throw std::runtime_error("CSV: node set does not tile a uniform grid");
        for (int a = 0; a < n; ++a) {
            const int i = static_cast<int>(std::llround((row[a + 1] - grid.extent[a][0]) / grid.h));
            if (i < 0 || i >= grid.nx(a) ||
                std::abs(grid.x_of(a, i) - row[a + 1]) > 1e-9 * std::max(1.0, grid.h))
                throw std::runtime_error("CSV: node set does not tile a uniform grid");
            idx[a] = i;
        }
        const std::size_t f = grid.flat(k, idx);
        if (seen[f]) throw std::runtime_error("CSV: duplicate node");
        seen[f] = 1;
        u.values[f] = row[n + 1];
    }
    for (char c : seen)
        if (!c) throw std::runtime_error("CSV: node set does not tile a uniform grid");
    u.require_finite();
    return u;
}

inline ScalarField read_field_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    return field_from_csv(in);
}

} // namespace parobs
