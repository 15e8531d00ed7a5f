#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "doust/types.hpp"

namespace doust {

/// Labelled tabular data; label 1 marks an anomaly.
struct Dataset {
    std::string name;
    std::vector<std::string> feature_names;
    Matrix features;
    std::vector<int> labels;

    [[nodiscard]] std::size_t rows() const noexcept { return labels.size(); }
    [[nodiscard]] std::size_t count(int label) const noexcept;
    [[nodiscard]] double anomaly_fraction() const noexcept;
    /// Copies the given rows, in the given order.
    [[nodiscard]] Dataset subset(const std::vector<std::size_t>& rows) const;
};

/// Reads a CSV with a header row, numeric feature columns and an integer
/// column named `label` holding 0 or 1. Quoted fields follow RFC 4180.
/// Errors name the offending (1-based, header excluded) row.
Dataset read_dataset_csv(std::istream& in, const std::string& name = "dataset");
Dataset load_dataset(const std::filesystem::path& path);

/// Writes features with 17 significant digits so values round-trip exactly.
void write_dataset_csv(std::ostream& out, const Dataset& data);
void save_dataset(const std::filesystem::path& path, const Dataset& data);

/// Splits one CSV record into fields. Exposed for testing.
std::vector<std::string> split_csv_record(const std::string& line);

/// Reads one logical record, joining physical lines inside quoted fields.
/// Returns false at end of input.
bool read_csv_record(std::istream& in, std::string& record);

}  // namespace doust
