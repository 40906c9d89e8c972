#pragma once

#include "sfbm/fbm.hpp"

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace sfbm {

using Metadata = std::vector<std::pair<std::string, std::string>>;

/// Doubles are written with 17 significant digits so a read-back is bit exact.
std::string format_double(double value);

/// CSV writer: "# key=value" comment lines, a header row, then data rows.
class CsvWriter {
public:
    CsvWriter(std::ostream& out, const Metadata& metadata, const std::vector<std::string>& columns);

    void row(const std::vector<double>& values);

private:
    std::ostream& out_;
    std::size_t columns_;
};

inline constexpr int kPathArchiveVersion = 1;

/// Text archive: a fixed header carrying (H, T, n, master seed, path index,
/// generator, format version) followed by the n+1 values, one per line.
void write_path_archive(const FbmPath& path, std::ostream& out);
FbmPath read_path_archive(std::istream& in);

/// Columns (t, value) with the archive header fields as comments.
void write_path_csv(const FbmPath& path, std::ostream& out, const Metadata& extra = {});

/// Metadata common to every export of a path.
Metadata path_metadata(const FbmPath& path);

}  // namespace sfbm
