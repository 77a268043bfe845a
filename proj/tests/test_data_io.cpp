#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "helpers.hpp"
#include "samlab/csv.hpp"
#include "samlab/data_io.hpp"
#include "samlab/errors.hpp"
#include "samlab/models.hpp"
#include "samlab/optim.hpp"
#include "samlab/sam.hpp"

using namespace samlab;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const char* tag) {
    fs::path dir = fs::temp_directory_path() / (std::string("samlab_test_") + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

}  // namespace

TEST_CASE("idx round trip: single all-zero image fixture") {
    fs::path dir = temp_dir("idx");
    io::Dataset one;
    one.kind = io::DatasetKind::Classification;
    one.feature_dim = 784;
    one.num_classes = 10;
    one.features.assign(784, 0.0);
    one.labels = {3};
    io::write_idx_pair(dir / "train-images-idx3-ubyte", dir / "train-labels-idx1-ubyte", one, 28, 28);
    io::write_idx_pair(dir / "t10k-images-idx3-ubyte", dir / "t10k-labels-idx1-ubyte", one, 28, 28);

    auto [train, test] = io::load_mnist(dir.string());
    REQUIRE(train.size() == 1);
    REQUIRE(test.size() == 1);
    CHECK(train.labels[0] == 3);
    for (double v : train.features) CHECK(v == 0.0);
}

TEST_CASE("idx errors: bad magic and truncation carry the file and offset") {
    fs::path dir = temp_dir("idx_err");
    {
        std::ofstream f(dir / "train-images-idx3-ubyte", std::ios::binary);
        const char bytes[] = {0, 0, 8, 9};  // wrong magic
        f.write(bytes, 4);
    }
    CHECK_THROWS_WITH_AS(io::load_mnist(dir.string()), doctest::Contains("bad magic"), FormatError);

    {
        std::ofstream f(dir / "train-images-idx3-ubyte", std::ios::binary);
        // valid header for one 2x2 image, but only 1 of 4 payload bytes present
        const unsigned char bytes[] = {0, 0, 8, 3, 0, 0, 0, 1, 0, 0, 0, 2, 0, 0, 0, 2, 42};
        f.write(reinterpret_cast<const char*>(bytes), sizeof bytes);
    }
    CHECK_THROWS_WITH_AS(io::load_mnist(dir.string()), doctest::Contains("offset 17"), FormatError);
}

TEST_CASE("canonical MNIST counts when a real copy is available") {
    const char* dir = std::getenv("MNIST_DIR");
    if (!dir) return;  // fixture-driven environments skip this
    auto [train, test] = io::load_mnist(dir);
    CHECK(train.size() == 60000);
    CHECK(test.size() == 10000);
}

TEST_CASE("gaussian task: determinism, shift wiring, argument errors") {
    io::GaussianTaskSpec spec;
    spec.classes = 3;
    spec.dim = 4;
    spec.per_class = 20;
    auto [a_train, a_test] = io::gen_gaussian_task(spec, 11);
    auto [b_train, b_test] = io::gen_gaussian_task(spec, 11);
    CHECK(a_train.features == b_train.features);
    CHECK(a_test.labels == b_test.labels);

    spec.shift = {std::numeric_limits<double>::quiet_NaN(), 0, 0, 0};
    CHECK_THROWS_AS(io::gen_gaussian_task(spec, 11), std::invalid_argument);
    spec.shift.clear();
    spec.per_class = 0;
    CHECK_THROWS_AS(io::gen_gaussian_task(spec, 11), std::invalid_argument);
}

TEST_CASE("gaussian task: far-separated classes are learnable to 99%") {
    io::GaussianTaskSpec spec;
    spec.classes = 2;
    spec.dim = 8;
    spec.per_class = 150;
    spec.separation = 10.0;  // mean distance ~ 10 sigma
    spec.noise = 1.0;
    auto [tr, te] = io::gen_gaussian_task(spec, 13);

    MlpModel linear({8, 2});
    OptimizerSpec opt;
    opt.kind = "adam";
    opt.lr = 0.05;
    TrainOptions topts;
    topts.epochs = 12;
    topts.batch_size = 30;
    topts.seed = 2;
    SamConfig plain;
    plain.K = 0;
    TrainResult res = train(linear, tr, &te, opt, plain, topts);
    CHECK(res.metrics.rows.back().eval_metric >= 0.99);
}

TEST_CASE("char corpus: windows, vocabulary, fixture arithmetic") {
    fs::path dir = temp_dir("chars");
    {
        std::ofstream f(dir / "ab.txt");
        f << "ab";
    }
    io::Dataset ab = io::load_char_corpus((dir / "ab.txt").string(), 1);
    REQUIRE(ab.size() == 1);
    CHECK(ab.vocab_size == 2);
    CHECK(ab.tokens[0] == 0);   // 'a'
    CHECK(ab.targets[0] == 1);  // 'b'

    {
        std::ofstream f(dir / "aabb.txt");
        f << "aabb";
    }
    CHECK(io::load_char_corpus((dir / "aabb.txt").string(), 1).vocab_size == 2);

    {
        std::ofstream f(dir / "empty.txt");
    }
    CHECK_THROWS_AS(io::load_char_corpus((dir / "empty.txt").string(), 4), DataError);

    const std::string fixture = std::string(SAMLAB_FIXTURE_DIR) + "/corpus.txt";
    io::Dataset corpus = io::load_char_corpus(fixture, 32);
    const auto bytes = fs::file_size(fixture);
    CHECK(corpus.size() == (bytes - 1) / 32);
}

TEST_CASE("shifted variant: intensity bias and label-conditional noise") {
    io::Dataset base = test::random_classification_dataset(50, 3, 4, 17);
    io::Dataset shifted = io::make_shifted_variant(base, 0.25, 0.3, 99);
    for (std::size_t i = 0; i < base.features.size(); ++i)
        CHECK(shifted.features[i] == base.features[i] + 0.25);
    std::size_t flips = 0;
    for (std::size_t i = 0; i < base.labels.size(); ++i)
        if (shifted.labels[i] != base.labels[i]) ++flips;
    CHECK(flips > 0);
    CHECK(flips < base.labels.size());
    shifted.validate();
}

TEST_CASE("checkpoint: bit-exact round trip over random sizes") {
    fs::path dir = temp_dir("ckpt");
    Rng rng(7);
    for (int rep = 0; rep < 12; ++rep) {
        io::Checkpoint c;
        c.descriptor = "mlp:relu:4," + std::to_string(2 + rep);
        c.seed = rng.next_u64();
        c.config_digest = io::digest_hex("cfg" + std::to_string(rep));
        const std::size_t n = 1 + static_cast<std::size_t>(rng.below(2000));
        c.params.resize(n);
        for (double& v : c.params) v = rng.normal() * std::pow(10.0, rng.uniform(-8, 8));
        const std::string path = (dir / ("c" + std::to_string(rep) + ".bin")).string();
        io::save_checkpoint(path, c);
        io::Checkpoint back = io::load_checkpoint(path);
        CHECK(back.descriptor == c.descriptor);
        CHECK(back.seed == c.seed);
        CHECK(back.config_digest == c.config_digest);
        REQUIRE(back.params.size() == n);
        for (std::size_t i = 0; i < n; ++i) CHECK(back.params[i] == c.params[i]);
    }
}

TEST_CASE("checkpoint: bad magic and truncation errors") {
    fs::path dir = temp_dir("ckpt_err");
    {
        std::ofstream f(dir / "bad.bin", std::ios::binary);
        f << "NOTMAGIC";
    }
    CHECK_THROWS_WITH_AS(io::load_checkpoint((dir / "bad.bin").string()),
                         doctest::Contains("bad magic"), FormatError);

    io::Checkpoint c;
    c.descriptor = "quadratic:3";
    c.params = {1.0, 2.0, 3.0};
    io::save_checkpoint((dir / "ok.bin").string(), c);
    // chop the parameter payload
    fs::resize_file(dir / "ok.bin", fs::file_size(dir / "ok.bin") - 8);
    CHECK_THROWS_AS(io::load_checkpoint((dir / "ok.bin").string()), FormatError);
}

TEST_CASE("csv sink: single header, append mode, quoting, round trip") {
    fs::path dir = temp_dir("csv");
    const std::string path = (dir / "m.csv").string();
    {
        io::MetricsSink sink(path, {"run", "value", "note"});
        sink.write_row({"r1", io::format_double(1.0 / 3.0), "plain"});
    }
    {
        io::MetricsSink sink(path, {"run", "value", "note"});
        sink.write_row({"r1", io::format_double(-0.0), "a,b \"quoted\"\nline"});
    }
    auto rows = io::read_csv(path);
    REQUIRE(rows.size() == 3);  // header + 2 rows, no duplicate header
    CHECK(rows[0][0] == "run");
    CHECK(rows[1][1] == "0.33333333333333331");
    CHECK(std::strtod(rows[1][1].c_str(), nullptr) == 1.0 / 3.0);  // 17 digits round-trip
    CHECK(rows[2][2] == "a,b \"quoted\"\nline");

    io::MetricsSink sink(path, {"run", "value", "note"});
    CHECK_THROWS_AS(sink.write_row({"too", "few"}), StateError);

    CHECK_THROWS_AS(io::MetricsSink("/nonexistent_dir_xyz/m.csv", {"a"}), FormatError);
}

TEST_CASE("format_double renders nan as literal and preserves values") {
    CHECK(io::format_double(std::numeric_limits<double>::quiet_NaN()) == "nan");
    for (double v : {1.0, -1.0, 3.141592653589793, 1e-300, -2.2250738585072014e-308}) {
        const std::string s = io::format_double(v);
        CHECK(std::strtod(s.c_str(), nullptr) == v);
    }
}

TEST_CASE("dataset validation catches inconsistencies") {
    io::Dataset ds = test::random_classification_dataset(5, 3, 2, 1);
    ds.labels[2] = 9;
    CHECK_THROWS_AS(ds.validate(), DataError);
    ds = test::random_classification_dataset(5, 3, 2, 1);
    ds.features.pop_back();
    CHECK_THROWS_AS(ds.validate(), DataError);
}
