#ifndef CAUSALNL_DATASETS_HPP
#define CAUSALNL_DATASETS_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "causalnl/common.hpp"
#include "causalnl/matrix.hpp"

namespace causalnl {

struct ImageShape {
    int channels = 1, height = 0, width = 0;
    int dim() const { return channels * height * width; }
};

/// Instances with ground-truth labels. Image datasets carry their shape so
/// augmentation and the conv preset know how rows fold back into planes.
struct LabeledDataset {
    Mat instances; // N x m
    std::vector<int> clean_labels;
    int num_classes = 0;
    std::string name;
    std::optional<ImageShape> image;

    int size() const { return instances.rows; }
    int feature_dim() const { return instances.cols; }

    void validate() const {
        if (instances.rows <= 0) throw std::invalid_argument("dataset: empty instance matrix");
        if (static_cast<int>(clean_labels.size()) != instances.rows)
            throw std::invalid_argument("dataset: label/instance count mismatch");
        if (num_classes < 2) throw std::invalid_argument("dataset: need at least two classes");
        for (int y : clean_labels)
            if (y < 0 || y >= num_classes) throw std::invalid_argument("dataset: label out of range");
        if (!instances.all_finite()) throw std::invalid_argument("dataset: non-finite feature value");
    }
};

/// A dataset whose training labels are corrupted. Clean labels are kept for
/// evaluation only; when `clean_labels_available` is false any read of them
/// throws, which is how the no-peeking rule is enforced at runtime.
class NoisyDataset {
public:
    Mat instances;
    std::vector<int> noisy_labels;
    int num_classes = 0;
    std::string name;
    std::optional<ImageShape> image;
    bool clean_labels_available = false;

    NoisyDataset() = default;
    NoisyDataset(const LabeledDataset& base, std::vector<int> noisy, bool clean_available)
        : instances(base.instances),
          noisy_labels(std::move(noisy)),
          num_classes(base.num_classes),
          name(base.name),
          image(base.image),
          clean_labels_available(clean_available),
          clean_labels_(base.clean_labels) {
        if (noisy_labels.size() != clean_labels_.size())
            throw std::invalid_argument("noisy dataset: label count mismatch");
        for (int y : noisy_labels)
            if (y < 0 || y >= num_classes) throw std::invalid_argument("noisy dataset: label out of range");
    }

    int size() const { return instances.rows; }
    int feature_dim() const { return instances.cols; }

    const std::vector<int>& clean_labels() const {
        if (!clean_labels_available)
            throw std::logic_error("clean labels are sealed for this dataset (evaluation-only guard)");
        return clean_labels_;
    }

private:
    std::vector<int> clean_labels_;
};

// --- two-moons generator -----------------------------------------------

/// Point on the class-`label` moon at parameter t in [0, pi].
inline std::array<double, 2> moon_curve(int label, double t) {
    if (label == 0) return {std::cos(t), std::sin(t)};
    return {1.0 - std::cos(t), 0.5 - std::sin(t)};
}

inline LabeledDataset generate_moon(int n, double noise_std, std::uint64_t seed) {
    if (n < 2 || n % 2 != 0) throw std::invalid_argument("generate_moon: n must be even and >= 2");
    if (noise_std < 0.0) throw std::invalid_argument("generate_moon: noise_std must be >= 0");
    LabeledDataset ds;
    ds.instances = Mat(n, 2);
    ds.clean_labels.resize(n);
    ds.num_classes = 2;
    ds.name = "moon";
    Rng rng = make_rng(seed);
    std::uniform_real_distribution<double> tdist(0.0, std::acos(-1.0));
    std::normal_distribution<double> jitter(0.0, 1.0);
    for (int i = 0; i < n; ++i) {
        const int label = i < n / 2 ? 0 : 1;
        const auto p = moon_curve(label, tdist(rng));
        double jx = 0.0, jy = 0.0;
        if (noise_std > 0.0) {
            jx = noise_std * jitter(rng);
            jy = noise_std * jitter(rng);
        }
        ds.instances(i, 0) = p[0] + jx;
        ds.instances(i, 1) = p[1] + jy;
        ds.clean_labels[i] = label;
    }
    return ds;
}

// --- IDX binary format ---------------------------------------------------

namespace detail {

inline std::uint32_t read_be32(std::istream& in, const char* what) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4)) throw FormatError(std::string("idx: truncated ") + what);
    return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) | (std::uint32_t(b[2]) << 8) |
           std::uint32_t(b[3]);
}

inline void write_be32(std::ostream& out, std::uint32_t v) {
    const unsigned char b[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                                static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

} // namespace detail

constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

/// Reads an IDX image/label file pair; pixels are scaled to [0,1].
inline LabeledDataset load_idx(const std::string& images_path, const std::string& labels_path) {
    std::ifstream img(images_path, std::ios::binary);
    if (!img) throw FormatError("idx: cannot open " + images_path);
    if (detail::read_be32(img, "image magic") != kIdxImagesMagic)
        throw FormatError("idx: bad image magic in " + images_path);
    const std::uint32_t count = detail::read_be32(img, "image count");
    const std::uint32_t rows = detail::read_be32(img, "image rows");
    const std::uint32_t cols = detail::read_be32(img, "image cols");
    if (count == 0 || rows == 0 || cols == 0) throw FormatError("idx: empty image file " + images_path);

    std::ifstream lab(labels_path, std::ios::binary);
    if (!lab) throw FormatError("idx: cannot open " + labels_path);
    if (detail::read_be32(lab, "label magic") != kIdxLabelsMagic)
        throw FormatError("idx: bad label magic in " + labels_path);
    const std::uint32_t lcount = detail::read_be32(lab, "label count");
    if (lcount != count)
        throw ConsistencyError("idx: image/label count mismatch (" + std::to_string(count) + " vs " +
                               std::to_string(lcount) + ")");

    const std::size_t pixels = std::size_t(count) * rows * cols;
    std::vector<unsigned char> raw(pixels);
    if (!img.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(pixels)))
        throw FormatError("idx: truncated pixel data in " + images_path);
    std::vector<unsigned char> lraw(count);
    if (!lab.read(reinterpret_cast<char*>(lraw.data()), static_cast<std::streamsize>(count)))
        throw FormatError("idx: truncated label data in " + labels_path);

    LabeledDataset ds;
    ds.instances = Mat(static_cast<int>(count), static_cast<int>(rows * cols));
    for (std::size_t i = 0; i < pixels; ++i) ds.instances.d[i] = raw[i] / 255.0;
    ds.clean_labels.assign(lraw.begin(), lraw.end());
    const int maxlab = *std::max_element(ds.clean_labels.begin(), ds.clean_labels.end());
    ds.num_classes = std::max(2, maxlab + 1);
    ds.name = "idx";
    ds.image = ImageShape{1, static_cast<int>(rows), static_cast<int>(cols)};
    return ds;
}

/// Writes the dataset back out as an IDX pair (pixels quantized to bytes).
inline void save_idx(const LabeledDataset& ds, const std::string& images_path,
                     const std::string& labels_path) {
    if (!ds.image) throw std::invalid_argument("save_idx: dataset has no image shape");
    if (ds.image->channels != 1) throw std::invalid_argument("save_idx: only single-channel images");
    std::ofstream img(images_path, std::ios::binary);
    if (!img) throw FormatError("idx: cannot write " + images_path);
    detail::write_be32(img, kIdxImagesMagic);
    detail::write_be32(img, static_cast<std::uint32_t>(ds.size()));
    detail::write_be32(img, static_cast<std::uint32_t>(ds.image->height));
    detail::write_be32(img, static_cast<std::uint32_t>(ds.image->width));
    std::vector<unsigned char> raw(ds.instances.d.size());
    for (std::size_t i = 0; i < raw.size(); ++i)
        raw[i] = static_cast<unsigned char>(std::lround(std::clamp(ds.instances.d[i], 0.0, 1.0) * 255.0));
    img.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));

    std::ofstream lab(labels_path, std::ios::binary);
    if (!lab) throw FormatError("idx: cannot write " + labels_path);
    detail::write_be32(lab, kIdxLabelsMagic);
    detail::write_be32(lab, static_cast<std::uint32_t>(ds.size()));
    std::vector<unsigned char> lraw(ds.clean_labels.begin(), ds.clean_labels.end());
    lab.write(reinterpret_cast<const char*>(lraw.data()), static_cast<std::streamsize>(lraw.size()));
}

/// First `count` samples as a new dataset.
inline LabeledDataset take_prefix(const LabeledDataset& ds, int count) {
    if (count <= 0 || count > ds.size()) throw std::invalid_argument("take_prefix: bad count");
    LabeledDataset out = ds;
    out.instances = Mat(count, ds.feature_dim());
    std::copy(ds.instances.d.begin(), ds.instances.d.begin() + std::size_t(count) * ds.feature_dim(),
              out.instances.d.begin());
    out.clean_labels.assign(ds.clean_labels.begin(), ds.clean_labels.begin() + count);
    return out;
}

// --- augmentation ---------------------------------------------------------

enum class AugmentMode { RandomCrop, HorizontalFlip };

/// Pad-4 random crop or probability-0.5 horizontal flip on a batch of square
/// single-channel images. 2D synthetic data must not be passed here.
inline Mat augment(const Mat& batch, const std::optional<ImageShape>& shape, AugmentMode mode,
                   std::uint64_t seed) {
    if (!shape) throw std::invalid_argument("augment: not an image dataset");
    const ImageShape& s = *shape;
    if (s.dim() != batch.cols) throw std::invalid_argument("augment: shape/feature mismatch");
    if (mode == AugmentMode::RandomCrop && s.height != s.width)
        throw std::invalid_argument("augment: random crop needs square images");

    Mat out(batch.rows, batch.cols);
    Rng rng = make_rng(seed);
    const int h = s.height, w = s.width, pad = 4;
    if (mode == AugmentMode::HorizontalFlip) {
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (int n = 0; n < batch.rows; ++n) {
            const bool flip = u(rng) < 0.5;
            for (int c = 0; c < s.channels; ++c) {
                const double* in = batch.row_ptr(n) + std::size_t(c) * h * w;
                double* o = out.row_ptr(n) + std::size_t(c) * h * w;
                for (int i = 0; i < h; ++i)
                    for (int j = 0; j < w; ++j) o[i * w + j] = in[i * w + (flip ? w - 1 - j : j)];
            }
        }
    } else {
        std::uniform_int_distribution<int> off(0, 2 * pad);
        for (int n = 0; n < batch.rows; ++n) {
            const int dy = off(rng), dx = off(rng);
            for (int c = 0; c < s.channels; ++c) {
                const double* in = batch.row_ptr(n) + std::size_t(c) * h * w;
                double* o = out.row_ptr(n) + std::size_t(c) * h * w;
                for (int i = 0; i < h; ++i) {
                    const int si = i + dy - pad;
                    for (int j = 0; j < w; ++j) {
                        const int sj = j + dx - pad;
                        o[i * w + j] =
                            (si >= 0 && si < h && sj >= 0 && sj < w) ? in[si * w + sj] : 0.0;
                    }
                }
            }
        }
    }
    return out;
}

// --- deterministic batching ------------------------------------------------

/// Index batches for one epoch: a seeded permutation of [0, n) chunked by
/// batch_size. The order is a pure function of (n, seed, epoch).
inline std::vector<std::vector<int>> batches(int n, int batch_size, std::uint64_t seed, int epoch,
                                             bool drop_last = false) {
    if (batch_size < 1) throw std::invalid_argument("batches: batch_size must be >= 1");
    if (batch_size > n) throw std::invalid_argument("batches: batch_size exceeds dataset size");
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(epoch)));
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<std::vector<int>> out;
    for (int start = 0; start < n; start += batch_size) {
        const int end = std::min(n, start + batch_size);
        if (drop_last && end - start < batch_size) break;
        out.emplace_back(perm.begin() + start, perm.begin() + end);
    }
    return out;
}

struct BatchIterator {
    int dataset_size = 0;
    int batch_size = 1;
    std::uint64_t shuffle_seed = 0;
    bool drop_last = false;

    std::vector<std::vector<int>> epoch_batches(int epoch) const {
        return batches(dataset_size, batch_size, shuffle_seed, epoch, drop_last);
    }
};

inline Mat gather_rows(const Mat& src, const std::vector<int>& idx) {
    Mat out(static_cast<int>(idx.size()), src.cols);
    for (std::size_t i = 0; i < idx.size(); ++i)
        std::copy(src.row_ptr(idx[i]), src.row_ptr(idx[i]) + src.cols, out.row_ptr(static_cast<int>(i)));
    return out;
}

// --- CSV interchange for 2D datasets ----------------------------------------

inline void write_moon_csv(const NoisyDataset& ds, const std::string& path) {
    if (ds.feature_dim() != 2) throw std::invalid_argument("moon csv: dataset is not 2D");
    std::ofstream out(path);
    if (!out) throw FormatError("moon csv: cannot write " + path);
    out << "x0,x1,clean,noisy\n";
    const auto& clean = ds.clean_labels();
    char buf[96];
    for (int i = 0; i < ds.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%d,%d\n", ds.instances(i, 0), ds.instances(i, 1),
                      clean[i], ds.noisy_labels[i]);
        out << buf;
    }
}

inline NoisyDataset read_moon_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("moon csv: cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || line != "x0,x1,clean,noisy")
        throw FormatError("moon csv: bad header in " + path);
    std::vector<double> xs;
    std::vector<int> clean, noisy;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        double a, b;
        int c, d;
        char comma;
        if (!(ss >> a >> comma >> b >> comma >> c >> comma >> d))
            throw FormatError("moon csv: bad row in " + path);
        xs.push_back(a);
        xs.push_back(b);
        clean.push_back(c);
        noisy.push_back(d);
    }
    if (clean.empty()) throw FormatError("moon csv: no rows in " + path);
    LabeledDataset base;
    base.instances = Mat(static_cast<int>(clean.size()), 2);
    base.instances.d.assign(xs.begin(), xs.end());
    base.clean_labels = clean;
    base.num_classes = 2;
    base.name = "moon";
    return NoisyDataset(base, noisy, true);
}

} // namespace causalnl

#endif
