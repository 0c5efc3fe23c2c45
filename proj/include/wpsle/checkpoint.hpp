// Binary checkpoints of a LadderRun: a versioned header carrying the config
// hash, then the per-(r, t, theta) running records and the per-path means.
#pragma once

#include <array>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "wpsle/error.hpp"
#include "wpsle/montecarlo.hpp"

namespace wpsle {

inline constexpr std::array<char, 8> checkpoint_magic{'W', 'P', 'S', 'L', 'E', 'C', 'K', '\0'};
inline constexpr std::uint32_t checkpoint_version = 1;

namespace detail {

template <class T>
void put(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T get(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!is) fail(ErrorCode::CheckpointMismatch, "truncated checkpoint");
    return v;
}

}  // namespace detail

/// Written to a temporary file and renamed, so a crash leaves the old one.
inline void save_checkpoint(const LadderRun& run, const std::filesystem::path& file) {
    const auto tmp = std::filesystem::path(file.string() + ".tmp");
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) fail(ErrorCode::ConfigError, "cannot write checkpoint " + tmp.string());
        os.write(checkpoint_magic.data(), checkpoint_magic.size());
        detail::put(os, checkpoint_version);
        detail::put(os, run.config.hash());
        detail::put(os, run.next_path);
        detail::put(os, run.n_used);
        detail::put(os, run.n_singular);
        detail::put(os, static_cast<std::uint64_t>(run.sum.size()));
        const std::uint64_t count = run.n_used;
        for (std::size_t k = 0; k < run.sum.size(); ++k) {
            detail::put(os, count);
            detail::put(os, run.sum[k]);
            detail::put(os, run.sum_sq[k]);
        }
        const std::size_t blocks = run.nr() * run.nt() * run.na();
        detail::put(os, static_cast<std::uint64_t>(blocks));
        for (std::size_t b = 0; b < blocks; ++b)
            os.write(reinterpret_cast<const char*>(run.G.data() + b * run.config.n_paths),
                     static_cast<std::streamsize>(run.next_path * sizeof(double)));
        if (!os) fail(ErrorCode::ConfigError, "failed writing checkpoint " + tmp.string());
    }
    std::filesystem::rename(tmp, file);
}

/// Restores a run for `cfg`; the stored config hash must match.
inline LadderRun load_checkpoint(const MonteCarloConfig& cfg, const std::filesystem::path& file) {
    std::ifstream is(file, std::ios::binary);
    if (!is) fail(ErrorCode::ConfigError, "cannot read checkpoint " + file.string());
    std::array<char, 8> magic{};
    is.read(magic.data(), magic.size());
    if (!is || magic != checkpoint_magic) fail(ErrorCode::CheckpointMismatch, "not a checkpoint file");
    if (detail::get<std::uint32_t>(is) != checkpoint_version) fail(ErrorCode::CheckpointMismatch, "unsupported checkpoint version");
    if (detail::get<std::uint64_t>(is) != cfg.hash()) fail(ErrorCode::CheckpointMismatch, "config hash differs from the checkpoint");
    auto run = make_ladder_run(cfg);
    run.next_path = detail::get<std::uint64_t>(is);
    run.n_used = detail::get<std::uint64_t>(is);
    run.n_singular = detail::get<std::uint64_t>(is);
    if (run.next_path > cfg.n_paths) fail(ErrorCode::CheckpointMismatch, "checkpoint path count exceeds the config");
    if (detail::get<std::uint64_t>(is) != run.sum.size()) fail(ErrorCode::CheckpointMismatch, "record count differs");
    for (std::size_t k = 0; k < run.sum.size(); ++k) {
        if (detail::get<std::uint64_t>(is) != run.n_used) fail(ErrorCode::CheckpointMismatch, "inconsistent record count");
        run.sum[k] = detail::get<double>(is);
        run.sum_sq[k] = detail::get<double>(is);
    }
    const std::size_t blocks = run.nr() * run.nt() * run.na();
    if (detail::get<std::uint64_t>(is) != blocks) fail(ErrorCode::CheckpointMismatch, "block count differs");
    for (std::size_t b = 0; b < blocks; ++b) {
        is.read(reinterpret_cast<char*>(run.G.data() + b * cfg.n_paths), static_cast<std::streamsize>(run.next_path * sizeof(double)));
        if (!is) fail(ErrorCode::CheckpointMismatch, "truncated checkpoint");
    }
    return run;
}

}  // namespace wpsle
