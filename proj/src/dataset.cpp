#include "doust/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>

namespace doust {

namespace {

bool parse_double(const std::string& field, double& out) {
    const char* first = field.data();
    const char* last = field.data() + field.size();
    while (first < last && (*first == ' ' || *first == '\t')) ++first;
    while (last > first && (last[-1] == ' ' || last[-1] == '\t' || last[-1] == '\r')) --last;
    if (first < last && *first == '+') ++first;
    if (first == last) return false;
    const auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc{} && ptr == last;
}

std::string row_error(std::size_t row, const std::string& what) {
    return "row " + std::to_string(row) + ": " + what;
}

bool needs_quotes(const std::string& s) {
    return s.find_first_of(",\"\r\n") != std::string::npos;
}

std::string quoted(const std::string& s) {
    if (!needs_quotes(s)) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + '"';
}

}  // namespace

std::size_t Dataset::count(int label) const noexcept {
    return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), label));
}

double Dataset::anomaly_fraction() const noexcept {
    return labels.empty() ? 0.0 : static_cast<double>(count(1)) / static_cast<double>(labels.size());
}

Dataset Dataset::subset(const std::vector<std::size_t>& rows) const {
    Dataset out;
    out.name = name;
    out.feature_names = feature_names;
    out.features.resize(static_cast<Eigen::Index>(rows.size()), features.cols());
    out.labels.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out.features.row(static_cast<Eigen::Index>(i)) = features.row(static_cast<Eigen::Index>(rows[i]));
        out.labels.push_back(labels[rows[i]]);
    }
    return out;
}

bool read_csv_record(std::istream& in, std::string& record) {
    record.clear();
    std::string line;
    bool in_quotes = false;
    bool any = false;
    while (std::getline(in, line)) {
        if (any) record += '\n';
        any = true;
        record += line;
        for (char c : line) {
            if (c == '"') in_quotes = !in_quotes;
        }
        if (!in_quotes) break;
    }
    if (!record.empty() && record.back() == '\r') record.pop_back();
    return any;
}

std::vector<std::string> split_csv_record(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    bool in_quotes = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"') {
            in_quotes = true;
        } else if (c == ',') {
            fields.push_back(std::move(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (in_quotes) throw DatasetError("unterminated quoted field");
    fields.push_back(std::move(cur));
    return fields;
}

Dataset read_dataset_csv(std::istream& in, const std::string& name) {
    std::string record;
    if (!read_csv_record(in, record) || record.empty()) throw DatasetError(name + ": empty file");
    const auto header = split_csv_record(record);
    const auto label_it = std::find(header.begin(), header.end(), "label");
    if (label_it == header.end()) throw DatasetError(name + ": missing column 'label'");
    const auto label_col = static_cast<std::size_t>(label_it - header.begin());

    Dataset data;
    data.name = name;
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (c != label_col) data.feature_names.push_back(header[c]);
    }
    const std::size_t dim = data.feature_names.size();
    std::vector<double> values;
    std::size_t row = 0;
    while (read_csv_record(in, record)) {
        if (record.empty()) continue;
        ++row;
        std::vector<std::string> fields;
        try {
            fields = split_csv_record(record);
        } catch (const DatasetError& e) {
            throw DatasetError(name + ": " + row_error(row, e.what()));
        }
        if (fields.size() != header.size()) {
            throw DatasetError(name + ": " + row_error(row, "expected " + std::to_string(header.size()) +
                                                                " fields, found " + std::to_string(fields.size())));
        }
        for (std::size_t c = 0; c < fields.size(); ++c) {
            double v = 0.0;
            if (!parse_double(fields[c], v)) {
                throw DatasetError(name + ": " + row_error(row, "non-numeric value '" + fields[c] + "' in column '" +
                                                                    header[c] + "'"));
            }
            if (c == label_col) {
                if (v != 0.0 && v != 1.0) {
                    throw DatasetError(name + ": " + row_error(row, "label must be 0 or 1, found '" + fields[c] + "'"));
                }
                data.labels.push_back(static_cast<int>(v));
            } else {
                values.push_back(v);
            }
        }
    }
    if (data.labels.empty()) throw DatasetError(name + ": no data rows");
    data.features.resize(static_cast<Eigen::Index>(data.labels.size()), static_cast<Eigen::Index>(dim));
    std::copy(values.begin(), values.end(), data.features.data());
    return data;
}

Dataset load_dataset(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DatasetError("cannot open " + path.string());
    return read_dataset_csv(in, path.stem().string());
}

void write_dataset_csv(std::ostream& out, const Dataset& data) {
    for (const auto& n : data.feature_names) out << quoted(n) << ',';
    out << "label\n";
    const auto old = out.precision(std::numeric_limits<double>::max_digits10);
    for (Eigen::Index r = 0; r < data.features.rows(); ++r) {
        for (Eigen::Index c = 0; c < data.features.cols(); ++c) out << data.features(r, c) << ',';
        out << data.labels[static_cast<std::size_t>(r)] << '\n';
    }
    out.precision(old);
}

void save_dataset(const std::filesystem::path& path, const Dataset& data) {
    std::ofstream out(path);
    if (!out) throw DatasetError("cannot write " + path.string());
    write_dataset_csv(out, data);
}

}  // namespace doust
