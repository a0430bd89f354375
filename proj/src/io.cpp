#include "levytip/io.hpp"

#include <array>
#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "json.hpp"

namespace levytip::io {

static_assert(std::endian::native == std::endian::little, "snapshot I/O assumes a little-endian host");

std::string format_double(double x) {
    std::array<char, 64> buf{};
    const auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), x);
    if (ec != std::errc{}) throw FormatError("format_double: conversion failed");
    return {buf.data(), end};
}

double parse_double(const std::string& token) {
    double x = 0.0;
    const char* first = token.data();
    const char* last = token.data() + token.size();
    const auto [ptr, ec] = std::from_chars(first, last, x);
    if (ec != std::errc{} || ptr != last) throw FormatError("not a number: '" + token + "'");
    return x;
}

namespace {

template <class T>
void put(std::ostream& out, T value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <class T>
T get(std::istream& in) {
    T value{};
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!in) throw FormatError("snapshot: truncated header or payload");
    return value;
}

std::string sanitize(std::string s) {
    for (char& ch : s) {
        if (ch == ',' || ch == '\n' || ch == '\r') ch = ';';
    }
    return s;
}

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> parts;
    std::string cur;
    for (char ch : line) {
        if (ch == sep) {
            parts.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    parts.push_back(cur);
    return parts;
}

}  // namespace

void write_snapshot(std::ostream& out, const DensityField& field, const DomainBox& domain, const NoiseSpec& noise) {
    out.write(kSnapshotMagic, 4);
    put<std::uint32_t>(out, kSnapshotVersion);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(field.half_resolution()));
    put<double>(out, field.time);
    for (double x : {domain.a, domain.b, domain.c, domain.d, noise.alpha, noise.eps_k, noise.eps_s}) put<double>(out, x);
    const int I = field.half_resolution();
    for (int i = -I + 1; i < I; ++i) {
        for (int j = -I + 1; j < I; ++j) put<double>(out, field(i, j));
    }
    if (!out) throw FormatError("snapshot: write failed");
}

void write_snapshot(const std::filesystem::path& file, const DensityField& field, const DomainBox& domain,
                    const NoiseSpec& noise) {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw FormatError("cannot open " + file.string() + " for writing");
    write_snapshot(out, field, domain, noise);
}

Snapshot read_snapshot(std::istream& in) {
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kSnapshotMagic, 4) != 0) throw FormatError("snapshot: bad magic");
    const auto version = get<std::uint32_t>(in);
    if (version != kSnapshotVersion) throw FormatError("snapshot: unsupported version " + std::to_string(version));
    const auto I = static_cast<int>(get<std::uint32_t>(in));
    if (I < 1 || I > 100000) throw FormatError("snapshot: implausible half-resolution");
    Snapshot snap;
    const double time = get<double>(in);
    snap.domain.a = get<double>(in);
    snap.domain.b = get<double>(in);
    snap.domain.c = get<double>(in);
    snap.domain.d = get<double>(in);
    snap.noise.alpha = get<double>(in);
    snap.noise.eps_k = get<double>(in);
    snap.noise.eps_s = get<double>(in);
    snap.field = DensityField(I, time);
    for (int i = -I + 1; i < I; ++i) {
        for (int j = -I + 1; j < I; ++j) snap.field(i, j) = get<double>(in);
    }
    if (in.peek() != std::char_traits<char>::eof()) throw FormatError("snapshot: trailing bytes");
    return snap;
}

Snapshot read_snapshot(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw FormatError("cannot open " + file.string());
    return read_snapshot(in);
}

void write_snapshot_csv(std::ostream& out, const DensityField& field, const DomainBox& domain) {
    out << "i,j,v,w,k,s,P\n";
    const int I = field.half_resolution();
    const double h = field.h();
    for (int i = -I + 1; i < I; ++i) {
        for (int j = -I + 1; j < I; ++j) {
            const RefPoint r{i * h, j * h};
            const Point x = from_reference(r, domain);
            out << i << ',' << j << ',' << format_double(r.v) << ',' << format_double(r.w) << ','
                << format_double(x.k) << ',' << format_double(x.s) << ',' << format_double(field(i, j)) << '\n';
        }
    }
}

void write_path_csv(std::ostream& out, const ProbablePath& path) {
    out << "t,k,s,density\n";
    for (const auto& e : path.entries) {
        out << format_double(e.t) << ',' << format_double(e.x.k) << ',' << format_double(e.x.s) << ','
            << format_double(e.density) << '\n';
    }
}

void write_sweep_header(std::ostream& out) { out << "alpha,eps,tipping_time,classification,kT,sT,distance_d,status\n"; }

void write_sweep_row(std::ostream& out, const SweepRecord& r) {
    out << format_double(r.alpha) << ',' << format_double(r.eps) << ',';
    if (r.ok() && r.tipping.transitioned()) out << format_double(r.tipping.time);
    out << ',' << (r.ok() ? to_string(r.classification) : std::string_view{}) << ',' << format_double(r.terminal_state.k)
        << ',' << format_double(r.terminal_state.s) << ',' << format_double(r.distance_d) << ',' << sanitize(r.status)
        << '\n';
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepRecord>& records) {
    write_sweep_header(out);
    for (const auto& r : records) write_sweep_row(out, r);
}

std::vector<SweepRecord> read_sweep_csv(std::istream& in, double cap) {
    std::vector<SweepRecord> records;
    std::string line;
    if (!std::getline(in, line)) return records;
    if (line != "alpha,eps,tipping_time,classification,kT,sT,distance_d,status") {
        throw FormatError("sweep csv: unexpected header '" + line + "'");
    }
    long line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto f = split(line, ',');
        if (f.size() != 8) throw FormatError("sweep csv line " + std::to_string(line_no) + ": expected 8 fields");
        SweepRecord r;
        r.alpha = parse_double(f[0]);
        r.eps = parse_double(f[1]);
        r.tipping.cap = cap;
        if (!f[2].empty()) {
            r.tipping.kind = TippingKind::Transition;
            r.tipping.time = parse_double(f[2]);
        }
        r.classification = f[3] == "L-H" ? Classification::LH : Classification::LL;
        r.terminal_state = {parse_double(f[4]), parse_double(f[5])};
        r.distance_d = parse_double(f[6]);
        r.status = f[7];
        records.push_back(r);
    }
    return records;
}

void write_trajectory_csv(std::ostream& out, const PathEnsemble& ensemble) {
    out << "path_id,t,k,s,absorbed_flag\n";
    for (std::size_t p = 0; p < ensemble.trajectories.size(); ++p) {
        for (const auto& s : ensemble.trajectories[p]) {
            out << p << ',' << format_double(s.t) << ',' << format_double(s.x.k) << ',' << format_double(s.x.s) << ','
                << (s.absorbed ? 1 : 0) << '\n';
        }
    }
}

std::string ensemble_summary_json(const PathEnsemble& ensemble, const NoiseSpec& noise, const DomainBox& domain,
                                  Point initial) {
    nlohmann::ordered_json j;
    j["n_paths"] = ensemble.n_paths;
    j["absorbed_count"] = ensemble.absorbed_count;
    j["seed"] = ensemble.seed;
    j["settings"] = {
        {"dt", ensemble.dt_mc},
        {"T", ensemble.T},
        {"alpha", noise.alpha},
        {"eps_k", noise.eps_k},
        {"eps_s", noise.eps_s},
        {"initial", {initial.k, initial.s}},
        {"domain", {domain.a, domain.b, domain.c, domain.d}},
    };
    return j.dump(2);
}

}  // namespace levytip::io
