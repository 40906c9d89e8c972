#include "sfbm/path_io.hpp"

#include "sfbm/errors.hpp"

#include <charconv>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>

namespace sfbm {

std::string format_double(double value) {
    char buffer[32];
    const int len = std::snprintf(buffer, sizeof buffer, "%.17g", value);
    return std::string(buffer, static_cast<std::size_t>(len));
}

CsvWriter::CsvWriter(std::ostream& out, const Metadata& metadata, const std::vector<std::string>& columns)
    : out_(out), columns_(columns.size()) {
    for (const auto& [key, value] : metadata) out_ << "# " << key << '=' << value << '\n';
    for (std::size_t c = 0; c < columns.size(); ++c) out_ << (c ? "," : "") << columns[c];
    out_ << '\n';
}

void CsvWriter::row(const std::vector<double>& values) {
    if (values.size() != columns_) throw DomainError("CSV row width does not match header");
    for (std::size_t c = 0; c < values.size(); ++c) out_ << (c ? "," : "") << format_double(values[c]);
    out_ << '\n';
}

Metadata path_metadata(const FbmPath& path) {
    return {{"format_version", std::to_string(kPathArchiveVersion)},
            {"hurst", format_double(path.hurst.value())},
            {"horizon", format_double(path.grid.horizon())},
            {"steps", std::to_string(path.grid.steps())},
            {"master_seed", std::to_string(path.seed.master_seed)},
            {"path_index", std::to_string(path.seed.path_index)},
            {"generator", std::string(to_string(path.generator))}};
}

void write_path_archive(const FbmPath& path, std::ostream& out) {
    out << "sfbm-path\n";
    for (const auto& [key, value] : path_metadata(path)) out << key << '=' << value << '\n';
    out << "values\n";
    for (double v : path.values) out << format_double(v) << '\n';
    if (!out) throw std::runtime_error("failed writing path archive");
}

namespace {

double parse_real(const std::string& text, const std::string& field) {
    try {
        std::size_t used = 0;
        const double value = std::stod(text, &used);
        if (used != text.size()) throw std::invalid_argument(text);
        return value;
    } catch (const std::exception&) {
        throw DomainError("archive field '" + field + "' is not a number: " + text);
    }
}

std::uint64_t parse_unsigned(const std::string& text, const std::string& field) {
    std::uint64_t value = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size()) {
        throw DomainError("archive field '" + field + "' is not an unsigned integer: " + text);
    }
    return value;
}

}  // namespace

FbmPath read_path_archive(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != "sfbm-path") throw DomainError("not an sfbm path archive");

    std::map<std::string, std::string> header;
    while (std::getline(in, line) && line != "values") {
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw DomainError("malformed archive header line: " + line);
        header[line.substr(0, eq)] = line.substr(eq + 1);
    }
    auto field = [&](const std::string& key) -> const std::string& {
        auto it = header.find(key);
        if (it == header.end()) throw DomainError("archive header lacks '" + key + "'");
        return it->second;
    };

    if (parse_unsigned(field("format_version"), "format_version") != kPathArchiveVersion) {
        throw DomainError("unsupported archive version " + field("format_version"));
    }
    const TimeGrid grid(parse_real(field("horizon"), "horizon"), parse_unsigned(field("steps"), "steps"));
    FbmPath path{grid,
                 HurstParam(parse_real(field("hurst"), "hurst")),
                 {parse_unsigned(field("master_seed"), "master_seed"),
                  parse_unsigned(field("path_index"), "path_index")},
                 parse_generator(field("generator")),
                 {}};
    path.values.reserve(grid.size());
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        path.values.push_back(parse_real(line, "value"));
    }
    if (path.values.size() != grid.size()) {
        throw DomainError("archive holds " + std::to_string(path.values.size()) + " values, expected " +
                          std::to_string(grid.size()));
    }
    return path;
}

void write_path_csv(const FbmPath& path, std::ostream& out, const Metadata& extra) {
    Metadata meta = path_metadata(path);
    meta.insert(meta.end(), extra.begin(), extra.end());
    CsvWriter csv(out, meta, {"t", "value"});
    for (std::size_t k = 0; k < path.values.size(); ++k) csv.row({path.grid.node(k), path.values[k]});
}

}  // namespace sfbm
