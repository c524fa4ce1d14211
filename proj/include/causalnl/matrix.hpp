#ifndef CAUSALNL_MATRIX_HPP
#define CAUSALNL_MATRIX_HPP

#include <cassert>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

namespace causalnl {

/// 64-byte-aligned allocator. Keeping every buffer on the same alignment
/// makes Eigen's vectorized kernels take identical code paths run to run,
/// which is what makes training traces bitwise reproducible.
template <class T>
struct AlignedAllocator {
    using value_type = T;
    static constexpr std::size_t alignment = 64;

    AlignedAllocator() = default;
    template <class U>
    AlignedAllocator(const AlignedAllocator<U>&) {}

    T* allocate(std::size_t n) {
        return static_cast<T*>(::operator new(n * sizeof(T), std::align_val_t(alignment)));
    }
    void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, std::align_val_t(alignment)); }

    template <class U>
    bool operator==(const AlignedAllocator<U>&) const {
        return true;
    }
    template <class U>
    bool operator!=(const AlignedAllocator<U>&) const {
        return false;
    }
};

using AlignedVec = std::vector<double, AlignedAllocator<double>>;

/// Dense row-major matrix of doubles. Batches are stored one sample per row;
/// images are flattened per row in (channel, row, col) order.
struct Mat {
    int rows = 0;
    int cols = 0;
    AlignedVec d;

    Mat() = default;
    Mat(int r, int c) : rows(r), cols(c), d(static_cast<std::size_t>(r) * static_cast<std::size_t>(c), 0.0) {}
    Mat(int r, int c, std::initializer_list<double> init) : Mat(r, c) {
        if (init.size() != d.size()) throw std::invalid_argument("Mat: initializer size mismatch");
        std::size_t i = 0;
        for (double v : init) d[i++] = v;
    }

    static Mat row(std::initializer_list<double> init) {
        Mat m(1, static_cast<int>(init.size()));
        std::size_t i = 0;
        for (double v : init) m.d[i++] = v;
        return m;
    }

    double& operator()(int r, int c) { return d[static_cast<std::size_t>(r) * cols + c]; }
    double operator()(int r, int c) const { return d[static_cast<std::size_t>(r) * cols + c]; }

    std::size_t size() const { return d.size(); }
    bool empty() const { return d.empty(); }
    bool same_shape(const Mat& o) const { return rows == o.rows && cols == o.cols; }

    double* row_ptr(int r) { return d.data() + static_cast<std::size_t>(r) * cols; }
    const double* row_ptr(int r) const { return d.data() + static_cast<std::size_t>(r) * cols; }

    bool all_finite() const {
        for (double v : d)
            if (!std::isfinite(v)) return false;
        return true;
    }
};

using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline Eigen::Map<EMat> emap(Mat& m) { return Eigen::Map<EMat>(m.d.data(), m.rows, m.cols); }
inline Eigen::Map<const EMat> emap(const Mat& m) {
    return Eigen::Map<const EMat>(m.d.data(), m.rows, m.cols);
}

inline Mat matmul(const Mat& a, const Mat& b) {
    assert(a.cols == b.rows);
    Mat c(a.rows, b.cols);
    emap(c).noalias() = emap(a) * emap(b);
    return c;
}

} // namespace causalnl

#endif
