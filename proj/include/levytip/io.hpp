#pragma once

// On-disk formats. All text output uses shortest round-trip decimal
// formatting, so files are byte-identical across runs of the same input.
// See docs/formats.md for the layouts.

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "levytip/analysis.hpp"
#include "levytip/montecarlo.hpp"
#include "levytip/solver.hpp"

namespace levytip::io {

inline constexpr char kSnapshotMagic[4] = {'N', 'F', 'P', 'E'};
inline constexpr std::uint32_t kSnapshotVersion = 1;

class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Shortest decimal string that parses back to the same double.
[[nodiscard]] std::string format_double(double x);
/// Strict parse of a whole token; throws FormatError.
[[nodiscard]] double parse_double(const std::string& token);

struct Snapshot {
    DensityField field;
    DomainBox domain;
    NoiseSpec noise;
};

void write_snapshot(std::ostream& out, const DensityField& field, const DomainBox& domain, const NoiseSpec& noise);
void write_snapshot(const std::filesystem::path& file, const DensityField& field, const DomainBox& domain,
                    const NoiseSpec& noise);
[[nodiscard]] Snapshot read_snapshot(std::istream& in);
[[nodiscard]] Snapshot read_snapshot(const std::filesystem::path& file);

/// Columns i,j,v,w,k,s,P in the binary row-major order.
void write_snapshot_csv(std::ostream& out, const DensityField& field, const DomainBox& domain);

/// Columns t,k,s,density.
void write_path_csv(std::ostream& out, const ProbablePath& path);

/// Columns alpha,eps,tipping_time,classification,kT,sT,distance_d,status.
void write_sweep_header(std::ostream& out);
void write_sweep_row(std::ostream& out, const SweepRecord& record);
void write_sweep_csv(std::ostream& out, const std::vector<SweepRecord>& records);
/// Reads rows written by write_sweep_csv; `cap` restores TippingOutcome::cap.
[[nodiscard]] std::vector<SweepRecord> read_sweep_csv(std::istream& in, double cap);

/// Columns path_id,t,k,s,absorbed_flag for every retained trajectory.
void write_trajectory_csv(std::ostream& out, const PathEnsemble& ensemble);

/// JSON summary: n_paths, absorbed_count, seed and the run settings.
[[nodiscard]] std::string ensemble_summary_json(const PathEnsemble& ensemble, const NoiseSpec& noise,
                                                const DomainBox& domain, Point initial);

}  // namespace levytip::io
