#ifndef CAUSALNL_PLOT_HPP
#define CAUSALNL_PLOT_HPP

#include <array>
#include <functional>
#include <vector>

#include "causalnl/datasets.hpp"
#include "causalnl/model.hpp"
#include "causalnl/png.hpp"

namespace causalnl {

/// Batch predictor over 2D points (rows of a N x 2 matrix).
using Predictor2d = std::function<std::vector<int>(const Mat&)>;

/// Class labels over a lattice spanning the dataset bounds padded by 10%.
struct BoundaryGrid {
    int resolution = 0;
    double x_min = 0, x_max = 0, y_min = 0, y_max = 0;
    std::vector<int> labels; // row-major, row 0 at y_min

    int label_at(int ix, int iy) const { return labels[static_cast<std::size_t>(iy) * resolution + ix]; }
    double x_of(int ix) const { return x_min + (x_max - x_min) * ix / (resolution - 1); }
    double y_of(int iy) const { return y_min + (y_max - y_min) * iy / (resolution - 1); }
};

inline BoundaryGrid boundary_grid(const Predictor2d& predictor, const LabeledDataset& ds,
                                  int resolution) {
    if (ds.feature_dim() != 2) throw std::invalid_argument("boundary plot: dataset is not 2D");
    if (resolution < 2) throw std::invalid_argument("boundary plot: resolution must be >= 2");
    double x0 = ds.instances(0, 0), x1 = x0, y0 = ds.instances(0, 1), y1 = y0;
    for (int i = 0; i < ds.size(); ++i) {
        x0 = std::min(x0, ds.instances(i, 0));
        x1 = std::max(x1, ds.instances(i, 0));
        y0 = std::min(y0, ds.instances(i, 1));
        y1 = std::max(y1, ds.instances(i, 1));
    }
    const double xpad = (x1 - x0) > 0 ? 0.1 * (x1 - x0) : 1.0;
    const double ypad = (y1 - y0) > 0 ? 0.1 * (y1 - y0) : 1.0;
    BoundaryGrid g;
    g.resolution = resolution;
    g.x_min = x0 - xpad;
    g.x_max = x1 + xpad;
    g.y_min = y0 - ypad;
    g.y_max = y1 + ypad;

    Mat lattice(resolution * resolution, 2);
    for (int iy = 0; iy < resolution; ++iy)
        for (int ix = 0; ix < resolution; ++ix) {
            lattice(iy * resolution + ix, 0) = g.x_of(ix);
            lattice(iy * resolution + ix, 1) = g.y_of(iy);
        }
    g.labels = predictor(lattice);
    return g;
}

inline std::array<unsigned char, 3> class_color(int label) {
    static const std::array<std::array<unsigned char, 3>, 10> palette = {{{31, 119, 180},
                                                                          {255, 127, 14},
                                                                          {44, 160, 44},
                                                                          {214, 39, 40},
                                                                          {148, 103, 189},
                                                                          {140, 86, 75},
                                                                          {227, 119, 194},
                                                                          {127, 127, 127},
                                                                          {188, 189, 34},
                                                                          {23, 190, 207}}};
    return palette[static_cast<std::size_t>(label) % palette.size()];
}

/// Renders class regions (lightened colors) plus a scatter of points
/// (saturated colors). Row 0 of the image is the top (largest y).
inline void render_boundary(const BoundaryGrid& grid, const Mat& points,
                            const std::vector<int>& point_labels, const std::string& out_path) {
    const int res = grid.resolution;
    RgbImage img(res, res);
    for (int iy = 0; iy < res; ++iy)
        for (int ix = 0; ix < res; ++ix) {
            const auto c = class_color(grid.label_at(ix, iy));
            const int py = res - 1 - iy;
            img.set(ix, py, static_cast<unsigned char>(c[0] + (255 - c[0]) * 0.65),
                    static_cast<unsigned char>(c[1] + (255 - c[1]) * 0.65),
                    static_cast<unsigned char>(c[2] + (255 - c[2]) * 0.65));
        }
    const double sx = (res - 1) / (grid.x_max - grid.x_min);
    const double sy = (res - 1) / (grid.y_max - grid.y_min);
    for (int i = 0; i < points.rows; ++i) {
        const int ix = static_cast<int>(std::lround((points(i, 0) - grid.x_min) * sx));
        const int iy = res - 1 - static_cast<int>(std::lround((points(i, 1) - grid.y_min) * sy));
        const auto c = class_color(point_labels[i]);
        for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx)
                if (dx * dx + dy * dy <= 2) img.set(ix + dx, iy + dy, c[0], c[1], c[2]);
    }
    write_png(img, out_path);
}

inline void plot_decision_boundary(const Predictor2d& predictor, const LabeledDataset& ds,
                                   int grid_resolution, const std::string& out_path) {
    const BoundaryGrid g = boundary_grid(predictor, ds, grid_resolution);
    render_boundary(g, ds.instances, ds.clean_labels, out_path);
}

inline void plot_decision_boundary(Branch& b, const LabeledDataset& ds, int grid_resolution,
                                   const std::string& out_path) {
    plot_decision_boundary([&b](const Mat& x) { return predict(b, x); }, ds, grid_resolution, out_path);
}

inline void plot_decision_boundary(Classifier& c, const LabeledDataset& ds, int grid_resolution,
                                   const std::string& out_path) {
    plot_decision_boundary([&c](const Mat& x) { return predict(c, x); }, ds, grid_resolution, out_path);
}

} // namespace causalnl

#endif
