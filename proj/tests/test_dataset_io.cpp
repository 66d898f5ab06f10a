#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "phash/dataset.hpp"
#include "phash/synth.hpp"

using phash::LabeledDataset;

namespace {

std::filesystem::path temp_path(const char* name) {
    return std::filesystem::temp_directory_path() / name;
}

LabeledDataset sample_dataset() {
    return LabeledDataset::from_rows(
        {"a1", "b2", "c3"},
        {{"red", "round"}, {"blue"}, {"red"}},
        {{1.0f, -2.5f, 0.125f}, {0.0f, 3.25f, -1.0f}, {9.5f, 0.5f, 0.0f}});
}

}  // namespace

TEST_CASE("dataset validation") {
    CHECK_THROWS_AS(LabeledDataset::from_rows({"a", "a"}, {{"x"}, {"y"}},
                                              {{1.0f}, {2.0f}}),
                    std::invalid_argument);
    CHECK_THROWS_AS(LabeledDataset::from_rows({"a", "b"}, {{"x"}, {}}, {{1.0f}, {2.0f}}),
                    std::invalid_argument);
    CHECK_THROWS_AS(LabeledDataset::from_rows({"a", "b"}, {{"x"}, {"y"}},
                                              {{1.0f}, {2.0f, 3.0f}}),
                    std::invalid_argument);
}

TEST_CASE("share_label uses set intersection") {
    LabeledDataset ds = sample_dataset();
    CHECK(ds.share_label(0, 2));
    CHECK_FALSE(ds.share_label(0, 1));
    CHECK_FALSE(ds.share_label(1, 2));
}

TEST_CASE("CSV round-trip") {
    LabeledDataset ds = sample_dataset();
    auto path = temp_path("phash_ds_test.csv");
    phash::write_dataset_csv(ds, path.string());
    LabeledDataset back = phash::read_dataset(path.string());
    REQUIRE(back.size() == ds.size());
    CHECK(back.dim() == ds.dim());
    for (size_t i = 0; i < ds.size(); ++i) {
        CHECK(back.item(i).id == ds.item(i).id);
        CHECK(back.item(i).labels == ds.item(i).labels);
        for (size_t d = 0; d < ds.dim(); ++d) {
            CHECK(back.item(i).features[d] == ds.item(i).features[d]);
        }
    }
    CHECK(back.label_vocab() == ds.label_vocab());
    std::filesystem::remove(path);
}

TEST_CASE("binary round-trip preserves structure") {
    LabeledDataset ds = sample_dataset();
    auto path = temp_path("phash_ds_test.phds");
    phash::write_dataset_binary(ds, path.string());
    LabeledDataset back = phash::read_dataset(path.string());  // magic sniffing
    REQUIRE(back.size() == ds.size());
    CHECK(back.dim() == ds.dim());
    for (size_t i = 0; i < ds.size(); ++i) {
        CHECK(back.item(i).id == ds.item(i).id);
        CHECK(back.item(i).labels == ds.item(i).labels);  // numeric ids preserved
        for (size_t d = 0; d < ds.dim(); ++d) {
            CHECK(back.item(i).features[d] == ds.item(i).features[d]);
        }
    }
    std::filesystem::remove(path);
}

TEST_CASE("malformed CSV input is reported with context") {
    auto path = temp_path("phash_ds_bad.csv");
    {
        std::ofstream out(path);
        out << "id,labels,f0\nx1,red,0.5\nx2,blue\n";  // short row
    }
    CHECK_THROWS_WITH_AS(phash::read_dataset_csv(path.string()),
                         doctest::Contains("wrong column count"), std::runtime_error);
    std::filesystem::remove(path);
}

TEST_CASE("truncated binary dataset names the byte offset") {
    LabeledDataset ds = sample_dataset();
    auto path = temp_path("phash_ds_trunc.phds");
    phash::write_dataset_binary(ds, path.string());
    std::filesystem::resize_file(path, std::filesystem::file_size(path) - 2);
    CHECK_THROWS_WITH_AS(phash::read_dataset_binary(path.string()),
                         doctest::Contains("at byte"), std::runtime_error);
    std::filesystem::remove(path);
}

TEST_CASE("synthetic generator honours sizes and separation") {
    phash::SynthParams params;
    params.clusters = 3;
    params.sizes = {200, 80, 20};
    params.dim = 8;
    params.noise = 0.3;
    params.separation = 4.0;
    params.seed = 12;
    LabeledDataset ds = phash::make_synthetic(params);
    REQUIRE(ds.size() == 300);
    CHECK(ds.dim() == 8);

    // label histogram is exactly the requested sizes
    std::vector<size_t> hist(3, 0);
    for (size_t i = 0; i < ds.size(); ++i) {
        REQUIRE(ds.item(i).labels.size() == 1);
        hist[ds.item(i).labels[0]]++;
    }
    CHECK(hist == std::vector<size_t>{200, 80, 20});

    // empirical class means stay separated (noise shrinks with sqrt(size))
    std::vector<std::vector<double>> means(3, std::vector<double>(8, 0.0));
    for (size_t i = 0; i < ds.size(); ++i) {
        for (size_t d = 0; d < 8; ++d) {
            means[ds.item(i).labels[0]][d] += ds.item(i).features[d];
        }
    }
    for (size_t c = 0; c < 3; ++c) {
        for (double& v : means[c]) v /= static_cast<double>(hist[c]);
    }
    for (size_t a = 0; a < 3; ++a) {
        for (size_t b = a + 1; b < 3; ++b) {
            double d2 = 0.0;
            for (size_t d = 0; d < 8; ++d) {
                d2 += (means[a][d] - means[b][d]) * (means[a][d] - means[b][d]);
            }
            CHECK(std::sqrt(d2) >= 0.8 * params.separation);
        }
    }
}

TEST_CASE("synthetic generation is deterministic per seed") {
    phash::SynthParams params;
    params.clusters = 2;
    params.sizes = {5, 7};
    params.dim = 3;
    params.seed = 77;
    LabeledDataset a = phash::make_synthetic(params);
    LabeledDataset b = phash::make_synthetic(params);
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) {
        CHECK(a.item(i).id == b.item(i).id);
        for (size_t d = 0; d < a.dim(); ++d) {
            CHECK(a.item(i).features[d] == b.item(i).features[d]);
        }
    }

    auto p1 = temp_path("phash_synth_a.csv");
    auto p2 = temp_path("phash_synth_b.csv");
    phash::write_dataset_csv(a, p1.string());
    phash::write_dataset_csv(b, p2.string());
    std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
    std::string s1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    std::string s2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    CHECK(s1 == s2);  // identical bytes
    std::filesystem::remove(p1);
    std::filesystem::remove(p2);
}

TEST_CASE("synthetic parameter validation") {
    phash::SynthParams params;
    params.clusters = 1;
    CHECK_THROWS_AS(phash::make_synthetic(params), std::invalid_argument);
    params.clusters = 3;
    params.sizes = {10, 10};
    CHECK_THROWS_AS(phash::make_synthetic(params), std::invalid_argument);
}
