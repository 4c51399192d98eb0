#include "prmix/app/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <string_view>

#include "prmix/error.hpp"

namespace prmix::app {
namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
        s.remove_suffix(1);
    }
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
    return s;
}

std::vector<std::string_view> split(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        out.push_back(trim(line.substr(start, comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

bool skippable(std::string_view line) {
    const std::string_view t = trim(line);
    return t.empty() || t.front() == '#';
}

std::optional<double> parse_number(std::string_view cell) {
    if (!cell.empty() && cell.front() == '+') cell.remove_prefix(1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (ec != std::errc() || ptr != cell.data() + cell.size() || cell.empty()) {
        return std::nullopt;
    }
    return v;
}

}  // namespace

std::size_t CsvTable::column(const std::string& name) const {
    for (std::size_t k = 0; k < header.size(); ++k) {
        if (header[k] == name) return k;
    }
    throw Error(ErrorCode::config, "column '" + name + "' not found in input");
}

CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::config, "cannot read input file '" + path.string() + "'");

    CsvTable table;
    std::string line;
    std::size_t line_no = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (skippable(line)) continue;
        const auto cells = split(line);
        if (!have_header) {
            for (auto c : cells) table.header.emplace_back(c);
            table.columns.resize(table.header.size());
            have_header = true;
            continue;
        }
        if (cells.size() != table.header.size()) {
            throw Error(ErrorCode::parse, "line " + std::to_string(line_no) + ": expected " +
                                              std::to_string(table.header.size()) +
                                              " fields, found " + std::to_string(cells.size()));
        }
        for (std::size_t k = 0; k < cells.size(); ++k) {
            const auto v = parse_number(cells[k]);
            if (!v || !std::isfinite(*v)) {
                throw Error(ErrorCode::parse, "line " + std::to_string(line_no) + ", column '" +
                                                  table.header[k] + "': '" +
                                                  std::string(cells[k]) + "' is not a finite number",
                            table.rows());
            }
            table.columns[k].push_back(*v);
        }
        table.lines.push_back(line_no);
    }
    if (!have_header) throw Error(ErrorCode::parse, "input file '" + path.string() + "' is empty");
    if (table.rows() == 0) {
        throw Error(ErrorCode::parse, "input file '" + path.string() + "' has no data rows");
    }
    return table;
}

std::vector<double> Ingested::y() const {
    std::vector<double> out;
    out.reserve(observations.size());
    for (const auto& o : observations) out.push_back(o.y);
    return out;
}

Ingested ingest_csv(const std::filesystem::path& path, const ColumnSpec& spec) {
    const CsvTable table = read_csv(path);
    Ingested out;
    const std::size_t yc = spec.y.empty() ? 0 : table.column(spec.y);
    out.y_column = table.header[yc];
    std::optional<std::size_t> nc;
    if (spec.trials) nc = table.column(*spec.trials);
    std::vector<std::size_t> xc;
    for (const auto& name : spec.predictors) xc.push_back(table.column(name));

    out.observations.reserve(table.rows());
    for (std::size_t r = 0; r < table.rows(); ++r) {
        Observation obs{table.columns[yc][r], std::nullopt};
        if (nc) {
            const double n = table.columns[*nc][r];
            if (n != std::floor(n) || n < 1.0 || n > 1e9) {
                throw Error(ErrorCode::parse, "line " + std::to_string(table.lines[r]) +
                                                  ", column '" + *spec.trials +
                                                  "': trial count must be a positive integer",
                            r);
            }
            obs.trials = static_cast<int>(n);
        }
        out.observations.push_back(obs);
    }
    for (std::size_t c : xc) out.predictors.push_back(table.columns[c]);
    out.lines = table.lines;
    return out;
}

}  // namespace prmix::app
