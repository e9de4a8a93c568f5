#include <semdec/dataio.hpp>
#include <semdec/error.hpp>

#include "support/oracles.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

using namespace semdec;

namespace {

VolumeSeries run_of(const Eigen::MatrixXd& data, std::string id = "r1") {
    VolumeSeries r;
    r.run_id = std::move(id);
    r.data = data;
    return r;
}

StimulusEvent event(std::string run, std::size_t onset, std::size_t n, std::string image, std::string syn = "n01443537") {
    return {std::move(run), onset, n, std::move(image), SynsetRef(std::move(syn))};
}

} // namespace

TEST(Zscore, HandComputedRow) {
    Eigen::MatrixXd d(2, 3);
    d << 1, 2, 3, 5, 5, 5;
    const auto z = zscore_runwise(run_of(d));
    EXPECT_NEAR(z.data(0, 0), -1.0, 1e-15);
    EXPECT_NEAR(z.data(0, 1), 0.0, 1e-15);
    EXPECT_NEAR(z.data(0, 2), 1.0, 1e-15);
    EXPECT_EQ(z.data.row(1), Eigen::RowVector3d::Zero());
}

TEST(Zscore, MomentsAndIdempotence) {
    Rng rng(3);
    const auto d = oracle::random_matrix(rng, 12, 40, 3.0);
    const auto z = zscore_runwise(run_of(d));
    const auto [mean, sd] = oracle::column_moments(z.data.transpose());
    for (Eigen::Index v = 0; v < d.rows(); ++v) {
        EXPECT_LT(std::abs(mean[v]), 1e-9);
        EXPECT_NEAR(sd[v], 1.0, 1e-9);
    }
    const auto zz = zscore_runwise(z);
    EXPECT_LT((zz.data - z.data).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Zscore, RejectsSingleVolume) {
    EXPECT_THROW(zscore_runwise(run_of(Eigen::MatrixXd::Ones(3, 1))), DegenerateError);
}

TEST(WindowAverage, WorkedExamples) {
    Eigen::MatrixXd d(1, 4);
    d << 0, 3, 6, 9;
    const std::vector<StimulusEvent> ev{event("r1", 0, 3, "img")};
    const auto t = window_average(run_of(d), ev, 1);
    ASSERT_EQ(t.rows(), 1);
    EXPECT_DOUBLE_EQ(t.data(0, 0), 6.0);
    EXPECT_EQ(t.image_ids[0], "img");

    Eigen::MatrixXd e(2, 5);
    e << 1, 2, 3, 4, 5, 10, 20, 30, 40, 50;
    const std::vector<StimulusEvent> single{event("r1", 2, 1, "x")};
    const auto s = window_average(run_of(e), single, 0);
    EXPECT_EQ(s.data.row(0), e.col(2).transpose());
    const auto w = window_average(run_of(e), ev, 1);
    EXPECT_DOUBLE_EQ(w.data(0, 0), 3.0);
    EXPECT_DOUBLE_EQ(w.data(1, 0), 30.0);
}

TEST(WindowAverage, ErrorsNameTheEvent) {
    Eigen::MatrixXd d = Eigen::MatrixXd::Ones(2, 5);
    const std::vector<StimulusEvent> over{event("r1", 0, 3, "ok"), event("r1", 2, 3, "late_image")};
    try {
        window_average(run_of(d), over, 1);
        FAIL();
    } catch (const OutOfBoundsError& e) {
        EXPECT_NE(std::string(e.what()).find("late_image"), std::string::npos);
    }
    const std::vector<StimulusEvent> wrong_run{event("r2", 0, 1, "x")};
    EXPECT_THROW(window_average(run_of(d), wrong_run, 0), OutOfBoundsError);
    const std::vector<StimulusEvent> empty_window{event("r1", 0, 0, "x")};
    EXPECT_THROW(window_average(run_of(d), empty_window, 0), OutOfBoundsError);
}

TEST(WindowAverage, CommutesWithVoxelPermutationAndConcatenation) {
    Rng rng(11);
    const auto d = oracle::random_matrix(rng, 7, 30);
    std::vector<StimulusEvent> a, b;
    for (std::size_t i = 0; i < 4; ++i) {
        a.push_back(event("r1", i * 3, 3, "a" + std::to_string(i)));
        b.push_back(event("r1", 13 + i * 4, 2, "b" + std::to_string(i)));
    }
    auto both = a;
    both.insert(both.end(), b.begin(), b.end());
    const auto ta = window_average(run_of(d), a, 1);
    const auto tb = window_average(run_of(d), b, 1);
    const auto tab = window_average(run_of(d), both, 1);
    EXPECT_EQ(tab.data.topRows(4), ta.data);
    EXPECT_EQ(tab.data.bottomRows(4), tb.data);

    const auto perm = rng.permutation(7);
    Eigen::MatrixXd pd(7, 30);
    for (Eigen::Index v = 0; v < 7; ++v) {
        pd.row(v) = d.row(static_cast<Eigen::Index>(perm[static_cast<std::size_t>(v)]));
    }
    const auto tp = window_average(run_of(pd), a, 1);
    for (Eigen::Index v = 0; v < 7; ++v) {
        EXPECT_EQ(tp.data.col(v), ta.data.col(static_cast<Eigen::Index>(perm[static_cast<std::size_t>(v)])));
    }
}

TEST(Preprocess, NormalisesEachRunThenAverages) {
    Eigen::MatrixXd r1(1, 4), r2(1, 4);
    r1 << 1, 2, 3, 4;
    r2 << 10, 10, 20, 20;
    const std::vector<VolumeSeries> runs{run_of(r1, "a"), run_of(r2, "b")};
    const std::vector<StimulusEvent> ev{event("b", 0, 2, "x"), event("a", 0, 2, "y")};
    const auto t = preprocess(runs, ev, 1);
    ASSERT_EQ(t.rows(), 2);
    const auto za = zscore_runwise(runs[0]).data;
    const auto zb = zscore_runwise(runs[1]).data;
    EXPECT_DOUBLE_EQ(t.data(0, 0), (zb(0, 1) + zb(0, 2)) / 2);
    EXPECT_DOUBLE_EQ(t.data(1, 0), (za(0, 1) + za(0, 2)) / 2);
    EXPECT_EQ(t.image_ids, (std::vector<std::string>{"x", "y"}));

    const std::vector<StimulusEvent> missing{event("c", 0, 1, "z")};
    EXPECT_THROW(preprocess(runs, missing, 0), OutOfBoundsError);
}

TEST(Events, ParseAndErrors) {
    std::istringstream one("run_id\tonset_volume\tn_volumes\timage_id\tsynset_id\nr1\t4\t3\timg1\tn01443537\n");
    const auto ev = parse_events(one);
    ASSERT_EQ(ev.size(), 1u);
    EXPECT_EQ(ev[0].onset_volume, 4u);
    EXPECT_EQ(ev[0].synset.str(), "n01443537");

    std::istringstream header_only("run_id\tonset_volume\tn_volumes\timage_id\tsynset_id\n");
    EXPECT_TRUE(parse_events(header_only).empty());

    std::istringstream reordered("synset_id\timage_id\trun_id\tn_volumes\tonset_volume\nn01443537\timg\tr\t3\t0\n");
    EXPECT_EQ(parse_events(reordered).at(0).image_id, "img");

    std::istringstream bad_onset(
        "run_id\tonset_volume\tn_volumes\timage_id\tsynset_id\nr1\t0\t3\ti\tn01443537\nr1\tabc\t3\ti\tn01443537\n");
    try {
        parse_events(bad_onset);
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 3u);
    }
    std::istringstream missing_col("run_id\tonset_volume\timage_id\tsynset_id\n");
    EXPECT_THROW(parse_events(missing_col), ParseError);
    std::istringstream bad_syn("run_id\tonset_volume\tn_volumes\timage_id\tsynset_id\nr\t0\t3\ti\tn0144\n");
    EXPECT_THROW(parse_events(bad_syn), ParseError);
}

TEST(Events, SaveLoadRoundTrip) {
    const std::vector<StimulusEvent> ev{event("r1", 0, 3, "a"), event("r2", 8, 2, "b", "dog")};
    const auto p = testenv::scratch("events") / "events.tsv";
    save_events(ev, p);
    const auto back = load_events(p);
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(back[1].run_id, "r2");
    EXPECT_EQ(back[1].n_volumes, 2u);
    EXPECT_EQ(back[1].synset.str(), "dog");
}

TEST(FeatureFiles, RoundTripPreservesDataAndOrder) {
    const auto dir = testenv::scratch("features");
    FeatureMatrix m;
    m.data.resize(2, 3);
    m.data << 1, 2, 3, 4, 5, 6;
    m.item_ids = {"z_last", "a_first"};
    m.labels = std::vector<SynsetRef>{SynsetRef("n01443537"), SynsetRef("n02084071")};
    save_feature_matrix(m, dir / "m.fmx");
    const auto back = load_feature_matrix(dir / "m.fmx");
    EXPECT_EQ(back.data, m.data);
    EXPECT_EQ(back.item_ids, m.item_ids);
    EXPECT_EQ(*back.labels, *m.labels);

    save_feature_matrix(m, dir / "m.csv");
    const auto csv = load_feature_matrix(dir / "m.csv");
    EXPECT_EQ(csv.data, m.data);
    EXPECT_EQ(csv.item_ids, m.item_ids);

    // Values exactly representable as float32 survive bit for bit.
    Rng rng(5);
    FeatureMatrix r;
    r.data.resize(5, 7);
    for (Eigen::Index i = 0; i < r.data.size(); ++i) {
        r.data.data()[i] = static_cast<double>(static_cast<float>(rng.normal()));
    }
    for (int i = 0; i < 5; ++i) {
        r.item_ids.push_back("i" + std::to_string(i));
    }
    save_feature_matrix(r, dir / "r.fmx");
    EXPECT_EQ(load_feature_matrix(dir / "r.fmx").data, r.data);
}

TEST(FeatureFiles, CsvWithoutLabels) {
    const auto p = testenv::scratch("csv") / "plain.csv";
    std::ofstream(p) << "a,1,2\nb,3,4\n";
    const auto m = load_feature_matrix(p);
    EXPECT_FALSE(m.labels.has_value());
    EXPECT_EQ(m.data(1, 1), 4.0);
    std::ofstream(p) << "a,1,2\nb,3\n";
    EXPECT_THROW(load_feature_matrix(p), ParseError);
}

TEST(TrialAndVolumeFiles, RoundTrip) {
    const auto dir = testenv::scratch("trials");
    TrialMatrix t;
    t.data = Eigen::MatrixXd::Constant(2, 2, 0.5);
    t.labels = {SynsetRef("a"), SynsetRef("b")};
    t.image_ids = {"x", "y"};
    save_trial_matrix(t, dir / "t.fmx");
    const auto back = load_trial_matrix(dir / "t.fmx");
    EXPECT_EQ(back.data, t.data);
    EXPECT_EQ(back.labels, t.labels);

    FeatureMatrix unl;
    unl.data = t.data;
    unl.item_ids = t.image_ids;
    save_feature_matrix(unl, dir / "u.fmx");
    EXPECT_THROW(load_trial_matrix(dir / "u.fmx"), FormatError);

    VolumeSeries vs = run_of(Eigen::MatrixXd::Constant(3, 4, 2.0), "run-7");
    vs.tr_seconds = 2.0;
    vs.voxel_ids = {"v0", "v1", "v2"};
    save_volume_series(vs, dir / "run.fmx");
    const auto vb = load_volume_series(dir / "run.fmx");
    EXPECT_EQ(vb.run_id, "run-7");
    EXPECT_EQ(vb.tr_seconds, 2.0);
    EXPECT_EQ(vb.data, vs.data);
    EXPECT_EQ(vb.voxel_ids, vs.voxel_ids);
}
