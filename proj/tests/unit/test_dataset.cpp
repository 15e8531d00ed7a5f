#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "doust/dataset.hpp"

using namespace doust;

namespace {

Dataset parse(const std::string& text) {
    std::istringstream in(text);
    return read_dataset_csv(in, "t");
}

std::string error_of(const std::string& text) {
    try {
        (void)parse(text);
    } catch (const DatasetError& e) {
        return e.what();
    }
    return {};
}

}  // namespace

TEST_CASE("small fixture") {
    const auto d = parse("a,b,label\n1,2,0\n3,4,0\n5,6,1\n");
    CHECK(d.rows() == 3);
    CHECK(d.count(0) == 2);
    CHECK(d.count(1) == 1);
    CHECK(d.anomaly_fraction() == doctest::Approx(1.0 / 3.0));
    CHECK(d.feature_names == std::vector<std::string>{"a", "b"});
    CHECK(d.features(2, 1) == 6.0);

    const auto s = d.subset({2, 0});
    CHECK(s.labels == std::vector<int>{1, 0});
    CHECK(s.features(0, 0) == 5.0);
    CHECK(s.features(1, 1) == 2.0);
}

TEST_CASE("golden file with quoting and scientific notation") {
    // The expected values were produced by an independent RFC 4180 reader.
    const std::filesystem::path dir = DOUST_TEST_DATA_DIR;
    const auto d = load_dataset(dir / "quoted.csv");
    std::ifstream ej(dir / "quoted.expected.json");
    const auto expected = nlohmann::json::parse(ej);
    CHECK(d.name == "quoted");
    CHECK(d.feature_names == expected.at("feature_names").get<std::vector<std::string>>());
    CHECK(d.labels == expected.at("labels").get<std::vector<int>>());
    const auto rows = expected.at("features").get<std::vector<std::vector<double>>>();
    REQUIRE(static_cast<std::size_t>(d.features.rows()) == rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t c = 0; c < rows[r].size(); ++c) {
            CHECK(d.features(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) == rows[r][c]);
        }
    }
    CHECK(std::signbit(d.features(2, 0)));
}

TEST_CASE("record splitting") {
    CHECK(split_csv_record("a,\"b,c\",\"d\"\"e\"") == std::vector<std::string>{"a", "b,c", "d\"e"});
    CHECK(split_csv_record("") == std::vector<std::string>{""});
    CHECK(split_csv_record(",,") == std::vector<std::string>{"", "", ""});

    std::istringstream in("x,\"two\r\nlines\"\r\nnext\r\n");
    std::string rec;
    REQUIRE(read_csv_record(in, rec));
    CHECK(split_csv_record(rec)[1].find("lines") != std::string::npos);
    REQUIRE(read_csv_record(in, rec));
    CHECK(rec == "next");
    CHECK_FALSE(read_csv_record(in, rec));
}

TEST_CASE("windows line endings") {
    const auto d = parse("a,label\r\n1.5,0\r\n2.5,1\r\n");
    CHECK(d.rows() == 2);
    CHECK(d.features(1, 0) == 2.5);
}

TEST_CASE("schema and row errors") {
    CHECK(error_of("").find("empty") != std::string::npos);
    CHECK(error_of("a,b\n1,2\n").find("'label'") != std::string::npos);
    CHECK(error_of("a,label\n").find("no data rows") != std::string::npos);
    CHECK(error_of("a,label\n1,0\nfoo,1\n").find("row 2") != std::string::npos);
    CHECK(error_of("a,label\n1,0\n2,1\n3,2\n").find("row 3") != std::string::npos);
    CHECK(error_of("a,label\n1,0.5\n").find("row 1") != std::string::npos);
    CHECK(error_of("a,label\n1,0,7\n").find("row 1") != std::string::npos);
    CHECK(error_of("a,label\n1e999,0\n").find("row 1") != std::string::npos);
    CHECK_THROWS_AS(load_dataset("/nonexistent/file.csv"), DatasetError);
}

TEST_CASE("write then read round trips exactly") {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> z;
    Dataset d;
    d.name = "rt";
    d.feature_names = {"plain", "needs, quotes", "has \"quote\""};
    d.features.resize(50, 3);
    for (Eigen::Index i = 0; i < d.features.size(); ++i) d.features.data()[i] = z(rng) * std::pow(10.0, z(rng) * 20);
    d.features(0, 0) = 0.1;
    d.features(1, 0) = -0.0;
    d.features(2, 0) = 5e-324;
    d.labels.resize(50);
    for (std::size_t i = 0; i < 50; ++i) d.labels[i] = static_cast<int>(i % 3 == 0);

    std::ostringstream out;
    write_dataset_csv(out, d);
    const auto back = parse(out.str());
    CHECK(back.feature_names == d.feature_names);
    CHECK(back.labels == d.labels);
    CHECK(back.features == d.features);
    CHECK(std::signbit(back.features(1, 0)));

    const auto path = std::filesystem::temp_directory_path() / "doust_roundtrip.csv";
    save_dataset(path, d);
    const auto loaded = load_dataset(path);
    CHECK(loaded.name == "doust_roundtrip");
    CHECK(loaded.features == d.features);
    std::filesystem::remove(path);
}
