#include "samlab/data_io.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>

#include "samlab/errors.hpp"
#include "samlab/rng.hpp"

namespace samlab::io {

namespace {

std::uint32_t read_u32_be(std::ifstream& f, const std::string& path) {
    std::array<unsigned char, 4> b{};
    if (!f.read(reinterpret_cast<char*>(b.data()), 4))
        throw FormatError(path + ": truncated at offset " + std::to_string(f.tellg() == -1 ? 0 : static_cast<long long>(f.tellg())));
    return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) | (std::uint32_t(b[2]) << 8) |
           std::uint32_t(b[3]);
}

std::vector<unsigned char> read_bytes(std::ifstream& f, std::size_t n, const std::string& path,
                                      std::size_t offset) {
    std::vector<unsigned char> buf(n);
    if (!f.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n))) {
        std::size_t got = static_cast<std::size_t>(f.gcount());
        throw FormatError(path + ": truncated at offset " + std::to_string(offset + got) +
                          " (expected " + std::to_string(n) + " payload bytes)");
    }
    return buf;
}

struct IdxImages {
    std::size_t count, rows, cols;
    std::vector<unsigned char> pixels;
};

IdxImages read_idx_images(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw FormatError(path + ": cannot open");
    std::uint32_t magic = read_u32_be(f, path);
    if (magic != 0x00000803u)
        throw FormatError(path + ": bad magic 0x" + [&] {
            char buf[16];
            std::snprintf(buf, sizeof buf, "%08x", magic);
            return std::string(buf);
        }() + " at offset 0 (expected 0x00000803)");
    std::size_t count = read_u32_be(f, path);
    std::size_t rows = read_u32_be(f, path);
    std::size_t cols = read_u32_be(f, path);
    IdxImages img{count, rows, cols, read_bytes(f, count * rows * cols, path, 16)};
    return img;
}

std::vector<unsigned char> read_idx_labels(const std::string& path, std::size_t expected) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw FormatError(path + ": cannot open");
    std::uint32_t magic = read_u32_be(f, path);
    if (magic != 0x00000801u)
        throw FormatError(path + ": bad magic at offset 0 (expected 0x00000801)");
    std::size_t count = read_u32_be(f, path);
    if (expected && count != expected)
        throw FormatError(path + ": label count " + std::to_string(count) + " != image count " +
                          std::to_string(expected));
    return read_bytes(f, count, path, 8);
}

Dataset idx_to_dataset(const IdxImages& img, const std::vector<unsigned char>& labels,
                       const std::string& tag) {
    Dataset ds;
    ds.kind = DatasetKind::Classification;
    ds.split_tag = tag;
    ds.feature_dim = img.rows * img.cols;
    ds.num_classes = 10;
    ds.features.resize(img.count * ds.feature_dim);
    for (std::size_t i = 0; i < img.pixels.size(); ++i)
        ds.features[i] = static_cast<double>(img.pixels[i]) / 255.0;
    ds.labels.assign(labels.begin(), labels.end());
    ds.validate();
    return ds;
}

}  // namespace

std::pair<Dataset, Dataset> load_mnist(const std::string& dir) {
    auto train_img = read_idx_images(dir + "/train-images-idx3-ubyte");
    auto train_lab = read_idx_labels(dir + "/train-labels-idx1-ubyte", train_img.count);
    auto test_img = read_idx_images(dir + "/t10k-images-idx3-ubyte");
    auto test_lab = read_idx_labels(dir + "/t10k-labels-idx1-ubyte", test_img.count);
    return {idx_to_dataset(train_img, train_lab, "train"), idx_to_dataset(test_img, test_lab, "test")};
}

std::pair<Dataset, Dataset> gen_gaussian_task(const GaussianTaskSpec& spec, std::uint64_t seed) {
    if (spec.classes < 2) throw std::invalid_argument("gen_gaussian_task: need at least 2 classes");
    if (spec.per_class < 1) throw std::invalid_argument("gen_gaussian_task: per_class must be positive");
    for (double v : spec.shift)
        if (!std::isfinite(v)) throw std::invalid_argument("gen_gaussian_task: non-finite shift");
    if (!spec.shift.empty() && spec.shift.size() != spec.dim)
        throw std::invalid_argument("gen_gaussian_task: shift dimension mismatch");

    Rng rng(seed);
    std::vector<double> means(spec.classes * spec.dim);
    for (double& m : means) m = spec.separation * rng.normal();

    auto make_split = [&](bool shifted, const std::string& tag) {
        Dataset ds;
        ds.kind = DatasetKind::Classification;
        ds.split_tag = tag;
        ds.feature_dim = spec.dim;
        ds.num_classes = spec.classes;
        std::size_t n = spec.classes * spec.per_class;
        ds.features.resize(n * spec.dim);
        ds.labels.resize(n);
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), std::size_t{0});
        rng.shuffle(order);
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t c = i / spec.per_class;
            std::size_t row = order[i];
            ds.labels[row] = static_cast<std::int32_t>(c);
            for (std::size_t j = 0; j < spec.dim; ++j) {
                double v = means[c * spec.dim + j] + spec.noise * rng.normal();
                if (shifted && !spec.shift.empty()) v += spec.shift[j];
                ds.features[row * spec.dim + j] = v;
            }
        }
        if (spec.label_noise > 0.0) {
            for (std::size_t i = 0; i < n; ++i) {
                if (rng.uniform() < spec.label_noise)
                    ds.labels[i] = static_cast<std::int32_t>(rng.below(spec.classes));
            }
        }
        ds.validate();
        return ds;
    };

    Dataset train = make_split(false, "train");
    Dataset test = make_split(true, "test");
    return {std::move(train), std::move(test)};
}

Dataset load_char_corpus(const std::string& path, std::size_t window) {
    if (window == 0) throw std::invalid_argument("load_char_corpus: window must be positive");
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError(path + ": cannot open");
    std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    if (text.empty()) throw DataError(path + ": empty corpus");

    std::array<std::int32_t, 256> id_of;
    id_of.fill(-1);
    for (unsigned char ch : text) id_of[ch] = 0;
    std::int32_t next = 0;
    for (std::size_t b = 0; b < 256; ++b)
        if (id_of[b] == 0) id_of[b] = next++;

    Dataset ds;
    ds.kind = DatasetKind::Sequence;
    ds.split_tag = "corpus";
    ds.vocab_size = static_cast<std::size_t>(next);
    ds.window = window;
    std::size_t count = (text.size() - 1) / window;
    ds.tokens.resize(count * window);
    ds.targets.resize(count * window);
    for (std::size_t i = 0; i < count; ++i) {
        for (std::size_t t = 0; t < window; ++t) {
            std::size_t pos = i * window + t;
            ds.tokens[pos] = id_of[static_cast<unsigned char>(text[pos])];
            ds.targets[pos] = id_of[static_cast<unsigned char>(text[pos + 1])];
        }
    }
    ds.validate();
    return ds;
}

Dataset make_shifted_variant(const Dataset& base, double intensity_bias, double label_noise,
                             std::uint64_t seed) {
    if (base.kind != DatasetKind::Classification)
        throw std::invalid_argument("make_shifted_variant: classification datasets only");
    Dataset out = base;
    out.split_tag = base.split_tag + "-shifted";
    for (double& v : out.features) v += intensity_bias;
    if (label_noise > 0.0) {
        Rng rng(seed);
        for (std::size_t i = 0; i < out.labels.size(); ++i) {
            if (rng.uniform() < label_noise) {
                // relabel to a different class, conditioned on the current label
                auto offset = 1 + rng.below(out.num_classes - 1);
                out.labels[i] = static_cast<std::int32_t>(
                    (static_cast<std::size_t>(out.labels[i]) + offset) % out.num_classes);
            }
        }
    }
    return out;
}

namespace {

void write_u32_be(std::ofstream& f, std::uint32_t v) {
    std::array<unsigned char, 4> b{static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                                   static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
    f.write(reinterpret_cast<const char*>(b.data()), 4);
}

}  // namespace

void write_idx_pair(const std::string& image_path, const std::string& label_path, const Dataset& ds,
                    std::size_t rows, std::size_t cols) {
    if (ds.kind != DatasetKind::Classification || rows * cols != ds.feature_dim)
        throw std::invalid_argument("write_idx_pair: geometry does not match feature_dim");
    std::ofstream fi(image_path, std::ios::binary);
    if (!fi) throw FormatError(image_path + ": cannot open for writing");
    write_u32_be(fi, 0x00000803u);
    write_u32_be(fi, static_cast<std::uint32_t>(ds.size()));
    write_u32_be(fi, static_cast<std::uint32_t>(rows));
    write_u32_be(fi, static_cast<std::uint32_t>(cols));
    for (double v : ds.features) {
        double q = std::clamp(v, 0.0, 1.0) * 255.0;
        unsigned char b = static_cast<unsigned char>(std::lround(q));
        fi.write(reinterpret_cast<const char*>(&b), 1);
    }
    std::ofstream fl(label_path, std::ios::binary);
    if (!fl) throw FormatError(label_path + ": cannot open for writing");
    write_u32_be(fl, 0x00000801u);
    write_u32_be(fl, static_cast<std::uint32_t>(ds.size()));
    for (std::int32_t l : ds.labels) {
        unsigned char b = static_cast<unsigned char>(l);
        fl.write(reinterpret_cast<const char*>(&b), 1);
    }
}

// ---- checkpoints ----

namespace {

constexpr char kMagic[8] = {'S', 'A', 'M', 'L', 'A', 'B', '0', '1'};

void write_u32_le(std::ofstream& f, std::uint32_t v) {
    std::array<unsigned char, 4> b{static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                                   static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    f.write(reinterpret_cast<const char*>(b.data()), 4);
}

void write_u64_le(std::ofstream& f, std::uint64_t v) {
    std::array<unsigned char, 8> b{};
    for (int i = 0; i < 8; ++i) b[static_cast<std::size_t>(i)] = static_cast<unsigned char>(v >> (8 * i));
    f.write(reinterpret_cast<const char*>(b.data()), 8);
}

std::uint32_t read_u32_le(std::ifstream& f, const std::string& path, const char* field) {
    std::array<unsigned char, 4> b{};
    if (!f.read(reinterpret_cast<char*>(b.data()), 4))
        throw FormatError(path + ": truncated while reading " + field);
    return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) | (std::uint32_t(b[2]) << 16) |
           (std::uint32_t(b[3]) << 24);
}

std::uint64_t read_u64_le(std::ifstream& f, const std::string& path, const char* field) {
    std::array<unsigned char, 8> b{};
    if (!f.read(reinterpret_cast<char*>(b.data()), 8))
        throw FormatError(path + ": truncated while reading " + field);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | b[static_cast<std::size_t>(i)];
    return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw FormatError(path + ": cannot open for writing");
    f.write(kMagic, 8);
    write_u32_le(f, ckpt.version);
    // seed and config digest travel inside the descriptor field
    std::string desc = ckpt.descriptor + ";seed=" + std::to_string(ckpt.seed) +
                       ";digest=" + ckpt.config_digest;
    write_u32_le(f, static_cast<std::uint32_t>(desc.size()));
    f.write(desc.data(), static_cast<std::streamsize>(desc.size()));
    write_u64_le(f, ckpt.params.size());
    for (double v : ckpt.params) {
        std::uint64_t bits;
        static_assert(sizeof bits == sizeof v);
        std::memcpy(&bits, &v, sizeof bits);
        write_u64_le(f, bits);
    }
    if (!f) throw FormatError(path + ": write failed");
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw FormatError(path + ": cannot open");
    char magic[8];
    if (!f.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0)
        throw FormatError(path + ": bad magic");
    Checkpoint ckpt;
    ckpt.version = read_u32_le(f, path, "version");
    if (ckpt.version != 1)
        throw FormatError(path + ": unsupported version " + std::to_string(ckpt.version));
    std::uint32_t dlen = read_u32_le(f, path, "descriptor length");
    std::string desc(dlen, '\0');
    if (!f.read(desc.data(), dlen)) throw FormatError(path + ": truncated while reading descriptor");
    // split off ;seed= and ;digest= suffixes
    auto dig_pos = desc.rfind(";digest=");
    if (dig_pos != std::string::npos) {
        ckpt.config_digest = desc.substr(dig_pos + 8);
        desc.resize(dig_pos);
    }
    auto seed_pos = desc.rfind(";seed=");
    if (seed_pos != std::string::npos) {
        ckpt.seed = std::strtoull(desc.c_str() + seed_pos + 6, nullptr, 10);
        desc.resize(seed_pos);
    }
    ckpt.descriptor = desc;
    std::uint64_t count = read_u64_le(f, path, "parameter count");
    ckpt.params.resize(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        std::uint64_t bits = read_u64_le(f, path, "parameters");
        double v;
        std::memcpy(&v, &bits, sizeof v);
        ckpt.params[static_cast<std::size_t>(i)] = v;
    }
    return ckpt;
}

std::string digest_hex(const std::string& text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace samlab::io
