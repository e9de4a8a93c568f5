#include <semdec/config.hpp>
#include <semdec/error.hpp>

#include "support/oracles.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

using namespace semdec;

namespace {

ExperimentConfig parse(const std::string& text) {
    std::istringstream in(text);
    return parse_config(in, "/base");
}

} // namespace

TEST(Config, DefaultsAndPaths) {
    const auto c = parse("train_trials = \"a/train.fmx\"  # trailing comment\nindex = \"idx#1.fmx\"\n");
    EXPECT_EQ(c.train_trials, std::filesystem::path("/base/a/train.fmx"));
    EXPECT_EQ(c.index, std::filesystem::path("/base/idx#1.fmx"));
    EXPECT_EQ(c.lambda_grid, ridge::default_lambda_grid());
    EXPECT_EQ(c.split_fraction, 0.9);
    EXPECT_TRUE(c.intercept);
    EXPECT_TRUE(c.adapt);
    EXPECT_EQ(c.adapt_target, AdaptTarget::true_train);
    EXPECT_EQ(c.adapt_scope, adapt::Scope::per_feature);
    EXPECT_EQ(c.wup_formula, WupFormula::standard);
    EXPECT_FALSE(c.k.has_value());
    EXPECT_FALSE(c.metric.has_value());
}

TEST(Config, AllValueKinds) {
    const auto c = parse(
        "lambda_grid = [0.1, 1, 1e3]\nsplit_fraction = 0.8\nseed = 12\nintercept = false\nk = 3\n"
        "metric = \"cosine\"\nadapt = false\nadapt_target = \"pred-train\"\nadapt_scope = \"global\"\n"
        "wup_formula = \"paper\"\nsubject = \"sub-01\"\ntaxonomy_format = \"wordnet\"\nhrf_shift = 2\n");
    EXPECT_EQ(c.lambda_grid, (std::vector<double>{0.1, 1, 1000}));
    EXPECT_EQ(c.split_fraction, 0.8);
    EXPECT_EQ(c.seed, 12u);
    EXPECT_FALSE(c.intercept);
    EXPECT_EQ(c.k, 3u);
    EXPECT_EQ(c.metric, Metric::cosine);
    EXPECT_FALSE(c.adapt);
    EXPECT_EQ(c.adapt_target, AdaptTarget::pred_train);
    EXPECT_EQ(c.adapt_scope, adapt::Scope::global);
    EXPECT_EQ(c.wup_formula, WupFormula::paper_literal);
    EXPECT_EQ(c.subject, "sub-01");
    EXPECT_EQ(c.taxonomy_format, TaxonomyFormat::wordnet);
    EXPECT_EQ(c.hrf_shift, 2u);
}

TEST(Config, Rejections) {
    EXPECT_THROW(parse("bogus = 1\n"), ConfigError);
    EXPECT_THROW(parse("seed = 1\nseed = 2\n"), ParseError);
    EXPECT_THROW(parse("[section]\n"), ParseError);
    EXPECT_THROW(parse("seed\n"), ParseError);
    EXPECT_THROW(parse("seed = -1\n"), ConfigError);
    EXPECT_THROW(parse("seed = 1.5\n"), ConfigError);
    EXPECT_THROW(parse("k = 0\n"), ConfigError);
    EXPECT_THROW(parse("split_fraction = 1\n"), ConfigError);
    EXPECT_THROW(parse("split_fraction = 0\n"), ConfigError);
    EXPECT_THROW(parse("metric = \"manhattan\"\n"), ConfigError);
    EXPECT_THROW(parse("subject = \"open\n"), ParseError);
    EXPECT_THROW(parse("lambda_grid = [1, x]\n"), ParseError);
    EXPECT_THROW(parse("intercept = 1\n"), ConfigError);
    try {
        parse("seed = 1\n\nwhat\n");
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 3u);
    }
}

TEST(Config, MissingFileNamesPath) {
    try {
        load_config("/nonexistent/dir/missing.toml");
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("missing.toml"), std::string::npos);
    }
}

TEST(Config, FormatParsesBack) {
    const auto dir = testenv::scratch("config");
    ExperimentConfig c;
    c.base_dir = dir;
    c.train_trials = dir / "t.fmx";
    c.train_features = dir / "f.fmx";
    c.test_trials = dir / "s.fmx";
    c.index = dir / "i.fmx";
    c.taxonomy = dir / "tax.tsv";
    c.lemmas = dir / "lem.tsv";
    c.model = dir / "m.fmx";
    c.out_dir = dir / "out";
    c.lambda_grid = {0.5, 2};
    c.seed = 9;
    c.k = 4;
    c.metric = Metric::cosine;
    c.adapt_scope = adapt::Scope::global;
    std::ofstream(dir / "c.toml") << format_config(c, dir);
    const auto back = load_config(dir / "c.toml");
    EXPECT_EQ(back.train_trials, c.train_trials);
    EXPECT_EQ(back.lemmas, c.lemmas);
    EXPECT_EQ(back.lambda_grid, c.lambda_grid);
    EXPECT_EQ(back.seed, 9u);
    EXPECT_EQ(back.k, 4u);
    EXPECT_EQ(back.metric, Metric::cosine);
    EXPECT_EQ(back.adapt_scope, adapt::Scope::global);
    EXPECT_EQ(back.base_dir, dir);
}

TEST(Config, LambdaList) {
    EXPECT_EQ(parse_lambda_list("1e-3, 1,10"), (std::vector<double>{1e-3, 1, 10}));
    EXPECT_THROW(parse_lambda_list("1,,2"), ConfigError);
    EXPECT_THROW(parse_lambda_list("-1,2"), ConfigError);
}
