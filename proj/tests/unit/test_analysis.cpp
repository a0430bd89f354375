#include <atomic>
#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "levytip/analysis.hpp"

using namespace levytip;

namespace {

const DomainBox kBox;
const Point kSaddle{0.8568, 4.4938};

DensityField bump_at(int I, int ci, int cj, double t, double height = 1.0) {
    DensityField f(I, t);
    const double h = f.h();
    for (int i = -I + 1; i < I; ++i) {
        for (int j = -I + 1; j < I; ++j) {
            const double d2 = (i - ci) * (i - ci) + (j - cj) * (j - cj);
            f(i, j) = height * std::exp(-d2 * h * h / 0.02);
        }
    }
    return f;
}

ProbablePath synthetic_path(const std::vector<std::pair<double, double>>& tk) {
    ProbablePath p;
    for (auto [t, k] : tk) p.entries.push_back({t, {k, 4.0}, 1.0, {}});
    return p;
}

// Runner whose "solve" replays a fixed sequence of peaks at node i.
CellRunner fake_runner(std::vector<int> peak_i, std::atomic<int>* calls = nullptr) {
    CellRunner r;
    r.domain = kBox;
    r.landmarks = {{0.15262, 4.3148}, kSaddle, {1.5732, 3.1562}};
    r.horizon = 10.0;
    r.run = [peak_i, calls](const NoiseSpec& noise, const SolveOptions& o) {
        if (calls) ++*calls;
        SolveResult res;
        res.noise = noise;
        res.domain = kBox;
        for (std::size_t q = 0; q < peak_i.size(); ++q) {
            DensityField f = bump_at(10, peak_i[q], 0, static_cast<double>(q));
            if (o.on_record && !o.on_record(f)) {
                res.status = SolveStatus::StoppedEarly;
                break;
            }
        }
        return res;
    };
    return r;
}

}  // namespace

TEST_CASE("argmax of a single bump") {
    const DensityField f = bump_at(20, 3, -2, 0.0);
    CHECK(argmax_node(f) == NodeIndex{3, -2});
    SolveResult r;
    r.domain = kBox;
    r.snapshots = {f, bump_at(20, 3, -2, 1.0)};
    const auto path = most_probable_path(r);
    REQUIRE(path.entries.size() == 2);
    const Point expect = from_reference({3 * f.h(), -2 * f.h()}, kBox);
    CHECK(path.entries[0].x.k == expect.k);
    CHECK(path.entries[0].x.s == expect.s);
    CHECK(path.entries[0].density == doctest::Approx(1.0));
}

TEST_CASE("argmax ties go to the smallest index") {
    DensityField f(5);
    f(2, 1) = 1.0;
    f(-1, 3) = 1.0;
    f(-1, 2) = 1.0;
    CHECK(argmax_node(f) == NodeIndex{-1, 2});
}

TEST_CASE("scaling the density leaves the path unchanged") {
    SolveResult a, b;
    a.domain = b.domain = kBox;
    for (int q = 0; q < 5; ++q) {
        DensityField f = bump_at(15, q - 2, 1 - q, q);
        a.snapshots.push_back(f);
        f.values() *= 7.0;
        b.snapshots.push_back(f);
    }
    const auto pa = most_probable_path(a), pb = most_probable_path(b);
    REQUIRE(pa.entries.size() == pb.entries.size());
    for (std::size_t q = 0; q < pa.entries.size(); ++q) CHECK(pa.entries[q].node == pb.entries[q].node);
}

TEST_CASE("refinement recovers an off-node peak") {
    const int I = 20;
    DensityField f(I);
    const double h = f.h();
    const double cv = 0.3 * h, cw = -0.2 * h;
    for (int i = -I + 1; i < I; ++i) {
        for (int j = -I + 1; j < I; ++j) {
            f(i, j) = 1.0 - ((i * h - cv) * (i * h - cv) + (j * h - cw) * (j * h - cw));
        }
    }
    PathTracker t(kBox, {kSaddle, true});
    t.add(f);
    const Point expect = from_reference({cv, cw}, kBox);
    CHECK(t.path().entries[0].x.k == doctest::Approx(expect.k).epsilon(1e-12));
    CHECK(t.path().entries[0].x.s == doctest::Approx(expect.s).epsilon(1e-12));
}

TEST_CASE("a jump without a competing peak is flagged") {
    PathTracker t(kBox, {});
    t.add(bump_at(40, -30, 0, 0.0));
    t.add(bump_at(40, 30, 0, 1.0));
    CHECK(t.path().warnings.size() == 1);

    // Two nearly equal peaks: the jump is legitimate.
    PathTracker u(kBox, {});
    u.add(bump_at(40, -30, 0, 0.0));
    DensityField both = bump_at(40, 30, 0, 1.0);
    both.values() += bump_at(40, -30, 0, 1.0, 0.99).values();
    u.add(both);
    CHECK(u.path().warnings.empty());
}

TEST_CASE("path stops at a fully absorbed snapshot") {
    SolveResult r;
    r.domain = kBox;
    r.snapshots = {bump_at(10, 0, 0, 0.0), bump_at(10, 1, 0, 1.0), DensityField(10, 2.0), bump_at(10, 2, 0, 3.0)};
    const auto path = most_probable_path(r);
    CHECK(path.entries.size() == 2);
    CHECK(path.absorbed);
    CHECK(path.absorbed_time == 2.0);
}

TEST_CASE("tipping time examples") {
    const auto never = synthetic_path({{0, 0.2}, {1, 0.5}, {2, 0.7}});
    CHECK_FALSE(tipping_time(never, kSaddle.k).transitioned());

    const auto cross = synthetic_path({{0.8, 0.2}, {1.6, 0.6}, {2.4, 0.9}, {3.2, 1.4}});
    const auto t = tipping_time(cross, kSaddle.k);
    CHECK(t.transitioned());
    CHECK(t.time == 2.4);
    CHECK(t.time <= t.cap);

    CHECK_FALSE(tipping_time(cross, kSaddle.k, 2.0).transitioned());
    CHECK_THROWS_AS((void)tipping_time(ProbablePath{}, kSaddle.k), std::invalid_argument);
}

TEST_CASE("tipping time ignores the path tail") {
    auto p = synthetic_path({{0, 0.2}, {1, 0.9}, {2, 0.3}});
    const auto before = tipping_time(p, kSaddle.k);
    p.entries.push_back({3, {2.0, 4.0}, 1.0, {}});
    const auto after = tipping_time(p, kSaddle.k);
    CHECK(before.time == after.time);
}

TEST_CASE("raising every k never delays tipping") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.2), lift(0.0, 0.3);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<std::pair<double, double>> tk;
        for (int q = 0; q < 20; ++q) tk.push_back({0.5 * q, u(rng)});
        const auto base = synthetic_path(tk);
        const double delta = lift(rng);
        for (auto& e : tk) e.second += delta;
        const auto lifted = synthetic_path(tk);
        const auto a = tipping_time(base, kSaddle.k), b = tipping_time(lifted, kSaddle.k);
        // brute force: first index whose k reaches the threshold
        double expect_b = -1.0;
        for (const auto& e : lifted.entries) {
            if (e.x.k >= kSaddle.k) {
                expect_b = e.t;
                break;
            }
        }
        CHECK(b.transitioned() == (expect_b >= 0.0));
        if (a.transitioned()) {
            REQUIRE(b.transitioned());
            CHECK(b.time <= a.time);
        }
    }
}

TEST_CASE("metastable state windows") {
    auto p = synthetic_path({{0, 0.1}, {1, 0.4}, {2, 1.0}, {3, 1.0}, {4, 1.0}});
    CHECK(metastable_state(p, 3).k == 1.0);
    CHECK(metastable_state(p, 1).k == 1.0);
    CHECK(metastable_state(p, 0).k == 1.0);
    p.entries.back().x = {1.37, 3.21};
    const Point last = metastable_state(p, 1);
    CHECK(last.k == 1.37);
    CHECK(last.s == 3.21);
    CHECK_THROWS_AS((void)metastable_state(ProbablePath{}, 1), std::invalid_argument);
}

TEST_CASE("distance to the competence state") {
    const Point high{1.5732, 3.1562};
    CHECK(distance_to_competence(high, high) == 0.0);
    CHECK(distance_to_competence({1.5732, 4.1562}, high) == doctest::Approx(1.0).epsilon(1e-15));
    const Point a{0.2, 4.0}, b{1.0, 3.0};
    CHECK(distance_to_competence(a, b) == distance_to_competence(b, a));
    CHECK(distance_to_competence(a, b) <= distance_to_competence(a, high) + distance_to_competence(high, b));
}

TEST_CASE("classify_cell on scripted runs") {
    // Node i = 0 is k = 1.5 (above the saddle), i = -5 is k = 0.75, i = -8 is k = 0.3.
    const auto stay = classify_cell(1.0, 0.1, fake_runner({-8, -8, -8}));
    CHECK(stay.ok());
    CHECK(stay.classification == Classification::LL);
    CHECK_FALSE(stay.tipping.transitioned());
    CHECK(stay.terminal_state.k == doctest::Approx(0.3));

    const auto go = classify_cell(1.0, 0.1, fake_runner({-8, -5, 0, 0}));
    CHECK(go.classification == Classification::LH);
    CHECK(go.tipping.time == 2.0);
    CHECK(go.distance_d == doctest::Approx(distance_to_competence(go.terminal_state, {1.5732, 3.1562})));
    CHECK(to_string(go.classification) == "L-H");
}

TEST_CASE("classify_cell stops on crossing when asked") {
    auto r = fake_runner({-8, 0, 0, 0, 0});
    r.stop_on_crossing = true;
    std::size_t entries = 0;
    r.on_path = [&](const SweepRecord&, const ProbablePath& p) { entries = p.entries.size(); };
    const auto rec = classify_cell(1.0, 0.2, r);
    CHECK(rec.classification == Classification::LH);
    CHECK(entries == 2);
}

TEST_CASE("classify_cell records solver failures") {
    CellRunner r = fake_runner({0});
    r.run = [](const NoiseSpec&, const SolveOptions&) -> SolveResult { throw SetupError("bad grid"); };
    const auto rec = classify_cell(1.0, 0.2, r);
    CHECK_FALSE(rec.ok());
    CHECK(rec.status == "failed: bad grid");

    r.run = [](const NoiseSpec&, const SolveOptions&) {
        SolveResult res;
        res.status = SolveStatus::Aborted;
        res.message = "blow-up";
        return res;
    };
    CHECK(classify_cell(1.0, 0.2, r).status == "failed: blow-up");
}

TEST_CASE("a 1x1 sweep equals classify_cell") {
    const auto r = fake_runner({-8, -5, 0});
    const auto single = classify_cell(0.7, 0.3, r);
    const auto swept = sweep({0.7}, {0.3}, r);
    REQUIRE(swept.size() == 1);
    CHECK(swept[0].classification == single.classification);
    CHECK(swept[0].tipping.time == single.tipping.time);
    CHECK(swept[0].terminal_state == single.terminal_state);
}

TEST_CASE("sweep order, resumption and worker independence") {
    std::atomic<int> calls{0};
    const auto r = fake_runner({-8, 0}, &calls);
    SweepOptions o;
    o.workers = 3;
    const auto all = sweep({0.5, 1.0, 1.5}, {0.1, 0.2}, r, o);
    REQUIRE(all.size() == 6);
    CHECK(calls == 6);
    CHECK(all[1].alpha == 0.5);
    CHECK(all[1].eps == 0.2);
    CHECK(all[2].alpha == 1.0);

    SweepOptions resume;
    resume.completed = {all[0], all[3]};
    std::size_t reported = 0;
    resume.on_cell = [&](const SweepRecord&, std::size_t, std::size_t) { ++reported; };
    calls = 0;
    const auto again = sweep({0.5, 1.0, 1.5}, {0.1, 0.2}, r, resume);
    CHECK(calls == 4);
    CHECK(reported == 4);
    for (std::size_t q = 0; q < all.size(); ++q) CHECK(again[q].tipping.time == all[q].tipping.time);

    resume.completed = all;
    calls = 0;
    (void)sweep({0.5, 1.0, 1.5}, {0.1, 0.2}, r, resume);
    CHECK(calls == 0);
}

TEST_CASE("sweep argument checks") {
    const auto r = fake_runner({0});
    CHECK_THROWS_AS((void)sweep({}, {0.1}, r), std::invalid_argument);
    CHECK_THROWS_AS((void)sweep({2.5}, {0.1}, r), std::domain_error);
}
