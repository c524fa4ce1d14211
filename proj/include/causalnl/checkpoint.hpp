#ifndef CAUSALNL_CHECKPOINT_HPP
#define CAUSALNL_CHECKPOINT_HPP

#include <cstdint>
#include <fstream>
#include <string>
#include <variant>
#include <vector>

#include "causalnl/model.hpp"

namespace causalnl {

namespace detail {

constexpr std::uint32_t kCheckpointMagic = 0x434e4c4bu; // "CNLK"
constexpr std::uint32_t kCheckpointVersion = 1;

inline void write_u32(std::ostream& out, std::uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}
inline void write_i32(std::ostream& out, std::int32_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}
inline std::uint32_t read_u32(std::istream& in) {
    std::uint32_t v = 0;
    if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw FormatError("checkpoint: truncated file");
    return v;
}
inline std::int32_t read_i32(std::istream& in) {
    std::int32_t v = 0;
    if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw FormatError("checkpoint: truncated file");
    return v;
}

inline void write_config(std::ostream& out, const BranchConfig& cfg) {
    write_u32(out, cfg.preset == Preset::Mlp2d ? 0 : 1);
    write_i32(out, cfg.feature_dim);
    write_i32(out, cfg.num_classes);
    write_i32(out, cfg.latent_dim);
    write_u32(out, static_cast<std::uint32_t>(cfg.hidden.size()));
    for (int h : cfg.hidden) write_i32(out, h);
    write_i32(out, cfg.image.channels);
    write_i32(out, cfg.image.height);
    write_i32(out, cfg.image.width);
}

inline BranchConfig read_config(std::istream& in) {
    BranchConfig cfg;
    cfg.preset = read_u32(in) == 0 ? Preset::Mlp2d : Preset::ConvSmall;
    cfg.feature_dim = read_i32(in);
    cfg.num_classes = read_i32(in);
    cfg.latent_dim = read_i32(in);
    const std::uint32_t hn = read_u32(in);
    if (hn > 64) throw FormatError("checkpoint: implausible hidden-layer count");
    cfg.hidden.clear();
    for (std::uint32_t i = 0; i < hn; ++i) cfg.hidden.push_back(read_i32(in));
    cfg.image.channels = read_i32(in);
    cfg.image.height = read_i32(in);
    cfg.image.width = read_i32(in);
    return cfg;
}

inline void write_params(std::ostream& out, const std::vector<Parameter*>& ps) {
    write_u32(out, static_cast<std::uint32_t>(ps.size()));
    for (const Parameter* p : ps) {
        write_i32(out, p->value.rows);
        write_i32(out, p->value.cols);
        out.write(reinterpret_cast<const char*>(p->value.d.data()),
                  static_cast<std::streamsize>(p->value.d.size() * sizeof(double)));
    }
}

inline void read_params(std::istream& in, const std::vector<Parameter*>& ps) {
    const std::uint32_t n = read_u32(in);
    if (n != ps.size()) throw FormatError("checkpoint: tensor count mismatch");
    for (Parameter* p : ps) {
        const int rows = read_i32(in), cols = read_i32(in);
        if (rows != p->value.rows || cols != p->value.cols)
            throw FormatError("checkpoint: tensor shape mismatch");
        if (!in.read(reinterpret_cast<char*>(p->value.d.data()),
                     static_cast<std::streamsize>(p->value.d.size() * sizeof(double))))
            throw FormatError("checkpoint: truncated tensor data");
    }
}

enum class CheckpointKind : std::uint32_t { Classifier = 0, Branch = 1 };

inline CheckpointKind open_checkpoint(std::istream& in) {
    if (read_u32(in) != kCheckpointMagic) throw FormatError("checkpoint: bad magic");
    const std::uint32_t version = read_u32(in);
    if (version != kCheckpointVersion)
        throw FormatError("checkpoint: unsupported version " + std::to_string(version));
    const std::uint32_t kind = read_u32(in);
    if (kind > 1) throw FormatError("checkpoint: unknown model kind");
    return static_cast<CheckpointKind>(kind);
}

} // namespace detail

inline void save_checkpoint(Branch& b, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("checkpoint: cannot write " + path);
    detail::write_u32(out, detail::kCheckpointMagic);
    detail::write_u32(out, detail::kCheckpointVersion);
    detail::write_u32(out, static_cast<std::uint32_t>(detail::CheckpointKind::Branch));
    detail::write_config(out, b.cfg);
    detail::write_params(out, b.parameters());
}

inline void save_checkpoint(Classifier& c, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("checkpoint: cannot write " + path);
    detail::write_u32(out, detail::kCheckpointMagic);
    detail::write_u32(out, detail::kCheckpointVersion);
    detail::write_u32(out, static_cast<std::uint32_t>(detail::CheckpointKind::Classifier));
    detail::write_config(out, c.cfg);
    detail::write_params(out, c.parameters());
}

inline Branch load_branch_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("checkpoint: cannot open " + path);
    if (detail::open_checkpoint(in) != detail::CheckpointKind::Branch)
        throw ConsistencyError("checkpoint: not a branch checkpoint: " + path);
    Branch b = make_branch(detail::read_config(in), 0);
    detail::read_params(in, b.parameters());
    return b;
}

inline Classifier load_classifier_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("checkpoint: cannot open " + path);
    if (detail::open_checkpoint(in) != detail::CheckpointKind::Classifier)
        throw ConsistencyError("checkpoint: not a classifier checkpoint: " + path);
    Classifier c = make_classifier(detail::read_config(in), 0);
    detail::read_params(in, c.parameters());
    return c;
}

/// Loads whichever model kind the file holds.
inline std::variant<Classifier, Branch> load_any_checkpoint(const std::string& path) {
    std::ifstream probe(path, std::ios::binary);
    if (!probe) throw FormatError("checkpoint: cannot open " + path);
    const auto kind = detail::open_checkpoint(probe);
    probe.close();
    if (kind == detail::CheckpointKind::Branch) return load_branch_checkpoint(path);
    return load_classifier_checkpoint(path);
}

/// Loads into an expected configuration; mismatches are architecture errors.
inline Branch load_branch_checkpoint(const std::string& path, const BranchConfig& expected) {
    Branch b = load_branch_checkpoint(path);
    if (!(b.cfg == expected))
        throw ConsistencyError("checkpoint: architecture mismatch for " + path);
    return b;
}

inline Classifier load_classifier_checkpoint(const std::string& path, const BranchConfig& expected) {
    Classifier c = load_classifier_checkpoint(path);
    if (!(c.cfg == expected))
        throw ConsistencyError("checkpoint: architecture mismatch for " + path);
    return c;
}

} // namespace causalnl

#endif
