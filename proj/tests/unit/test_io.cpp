#include <cmath>
#include <cstring>
#include <limits>
#include <random>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "levytip/io.hpp"

using namespace levytip;
using namespace levytip::io;

namespace {

template <class T>
T read_at(const std::string& bytes, std::size_t offset) {
    T v;
    std::memcpy(&v, bytes.data() + offset, sizeof(T));
    return v;
}

}  // namespace

TEST_CASE("format_double round trips random doubles") {
    std::mt19937_64 rng(99);
    for (int q = 0; q < 20000; ++q) {
        const std::uint64_t bits = rng();
        double x;
        std::memcpy(&x, &bits, sizeof x);
        if (!std::isfinite(x)) continue;
        CHECK(parse_double(format_double(x)) == x);
    }
    CHECK(format_double(0.1) == "0.1");
    CHECK(format_double(2.0) == "2");
    CHECK(format_double(-1.5e-300) == "-1.5e-300");
}

TEST_CASE("parse_double is strict") {
    CHECK_THROWS_AS((void)parse_double("1.5x"), FormatError);
    CHECK_THROWS_AS((void)parse_double(""), FormatError);
    CHECK_THROWS_AS((void)parse_double("abc"), FormatError);
}

TEST_CASE("snapshot binary layout") {
    DensityField f(2, 1.25);
    f(-1, -1) = 1.0;
    f(-1, 0) = 2.0;
    f(0, -1) = 4.0;
    f(1, 1) = -3.5;
    const DomainBox box{0.0, 3.0, 2.0, 7.0};
    const NoiseSpec noise{1.5, 0.25, 0.125};
    std::ostringstream out;
    write_snapshot(out, f, box, noise);
    const std::string b = out.str();
    REQUIRE(b.size() == 76 + 9 * 8);
    CHECK(b.substr(0, 4) == "NFPE");
    CHECK(read_at<std::uint32_t>(b, 4) == 1);
    CHECK(read_at<std::uint32_t>(b, 8) == 2);
    CHECK(read_at<double>(b, 12) == 1.25);
    CHECK(read_at<double>(b, 20) == 0.0);
    CHECK(read_at<double>(b, 28) == 3.0);
    CHECK(read_at<double>(b, 36) == 2.0);
    CHECK(read_at<double>(b, 44) == 7.0);
    CHECK(read_at<double>(b, 52) == 1.5);
    CHECK(read_at<double>(b, 60) == 0.25);
    CHECK(read_at<double>(b, 68) == 0.125);
    // values with i outer, j inner
    CHECK(read_at<double>(b, 76) == 1.0);
    CHECK(read_at<double>(b, 84) == 2.0);
    CHECK(read_at<double>(b, 100) == 4.0);
    CHECK(read_at<double>(b, 76 + 8 * 8) == -3.5);
}

TEST_CASE("snapshot round trip is bit exact") {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> n;
    DensityField f(7, 3.3);
    for (Eigen::Index q = 0; q < f.values().size(); ++q) f.values()(q) = n(rng);
    f(0, 0) = std::numeric_limits<double>::denorm_min();
    std::ostringstream out;
    write_snapshot(out, f, {}, {1.0, 0.3, 0.3});
    std::istringstream in(out.str());
    const Snapshot s = read_snapshot(in);
    CHECK(s.field.half_resolution() == 7);
    CHECK(s.field.time == 3.3);
    CHECK(s.field.values() == f.values());
    CHECK(s.noise == NoiseSpec{1.0, 0.3, 0.3});
    CHECK(s.domain == DomainBox{});
}

TEST_CASE("corrupt snapshots are rejected") {
    std::ostringstream out;
    write_snapshot(out, DensityField(3), {}, {});
    const std::string good = out.str();

    std::string bad = good;
    bad[0] = 'X';
    std::istringstream a(bad);
    CHECK_THROWS_AS((void)read_snapshot(a), FormatError);

    std::istringstream b(good.substr(0, good.size() - 3));
    CHECK_THROWS_AS((void)read_snapshot(b), FormatError);

    std::istringstream c(good + "x");
    CHECK_THROWS_AS((void)read_snapshot(c), FormatError);
}

TEST_CASE("snapshot csv columns") {
    DensityField f(2);
    f(1, -1) = 0.5;
    std::ostringstream out;
    write_snapshot_csv(out, f, {});
    std::istringstream in(out.str());
    std::string line;
    std::getline(in, line);
    CHECK(line == "i,j,v,w,k,s,P");
    std::getline(in, line);
    CHECK(line == "-1,-1,-0.5,-0.5,0.75,3.25,0");
    int rows = 1;
    while (std::getline(in, line)) {
        ++rows;
        if (line.rfind("1,-1,", 0) == 0) CHECK(line == "1,-1,0.5,-0.5,2.25,3.25,0.5");
    }
    CHECK(rows == 9);
}

TEST_CASE("sweep csv round trip") {
    SweepRecord a;
    a.alpha = 1.5;
    a.eps = 0.25;
    a.tipping = {TippingKind::Transition, 9.55, 100.0};
    a.classification = Classification::LH;
    a.terminal_state = {1.6, 3.1};
    a.distance_d = 0.0734;
    SweepRecord b;
    b.alpha = 0.25;
    b.eps = 0.4;
    b.terminal_state = {0.2, 4.3};
    b.distance_d = 1.9;
    SweepRecord c;
    c.alpha = 1.0;
    c.eps = 0.1;
    c.status = "failed: dt, too large";
    std::ostringstream out;
    write_sweep_csv(out, {a, b, c});
    std::istringstream in(out.str());
    const auto back = read_sweep_csv(in, 100.0);
    REQUIRE(back.size() == 3);
    CHECK(back[0].tipping.transitioned());
    CHECK(back[0].tipping.time == 9.55);
    CHECK(back[0].classification == Classification::LH);
    CHECK(back[0].terminal_state == a.terminal_state);
    CHECK(back[0].distance_d == a.distance_d);
    CHECK_FALSE(back[1].tipping.transitioned());
    CHECK(back[1].classification == Classification::LL);
    CHECK(back[2].status == "failed: dt; too large");
    CHECK_FALSE(back[2].ok());

    std::istringstream wrong("a,b\n1,2\n");
    CHECK_THROWS_AS((void)read_sweep_csv(wrong, 30.0), FormatError);
}

TEST_CASE("path and trajectory csv") {
    ProbablePath p;
    p.entries.push_back({0.05, {0.15, 4.3}, 12.5, {}});
    std::ostringstream out;
    write_path_csv(out, p);
    CHECK(out.str() == "t,k,s,density\n0.05,0.15,4.3,12.5\n");

    PathEnsemble e;
    e.trajectories = {{{0.0, {1.0, 4.0}, false}, {0.5, {3.2, 4.0}, true}}};
    std::ostringstream t;
    write_trajectory_csv(t, e);
    CHECK(t.str() == "path_id,t,k,s,absorbed_flag\n0,0,1,4,0\n0,0.5,3.2,4,1\n");
}

TEST_CASE("ensemble summary json") {
    PathEnsemble e;
    e.n_paths = 100;
    e.absorbed_count = 7;
    e.seed = 5;
    e.dt_mc = 1e-3;
    e.T = 3.0;
    const auto j = nlohmann::json::parse(ensemble_summary_json(e, NoiseSpec::isotropic(1.0, 0.25), {}, {1.5, 4.5}));
    CHECK(j["n_paths"] == 100);
    CHECK(j["absorbed_count"] == 7);
    CHECK(j["settings"]["alpha"] == 1.0);
    CHECK(j["settings"]["initial"][0] == 1.5);
}
