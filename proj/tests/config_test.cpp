#include <gtest/gtest.h>

#include "factsteer/config/run_config.hpp"

using namespace factsteer;
using namespace factsteer::config;

TEST(Presets, TableLookup) {
  const auto table = load_presets();
  const auto llama = lookup_preset(table, "llama-3.1-8b", eval::Method::pag, steer::Variant::H);
  EXPECT_EQ(llama.layer, 25);
  EXPECT_EQ(llama.gamma, 3.0);
  EXPECT_EQ(llama.tau, 0.25);
  const auto qwen = lookup_preset(table, "qwen2.5-7b", eval::Method::pag, steer::Variant::M);
  EXPECT_EQ(qwen.layer, 24);
  EXPECT_EQ(qwen.gamma, 0.1);
  EXPECT_EQ(qwen.tau, 0.69);
  EXPECT_EQ(lookup_preset(table, "qwen2.5-7b", eval::Method::pag, steer::Variant::S).tau, 0.69);
  EXPECT_EQ(lookup_preset(table, "qwen2.5-14b", eval::Method::rag, steer::Variant::M).layer, 43);
  EXPECT_THROW(lookup_preset(table, "gpt-9", eval::Method::rag, steer::Variant::M), InvalidArgument);
}

TEST(Resolve, FlagsOverFileOverPresetOverDefaults) {
  const auto table = load_presets();
  const auto defaults = resolve(nullptr, nullptr, table);
  EXPECT_EQ(defaults.max_new_tokens, 500);
  EXPECT_EQ(defaults.tau, 0.5);
  EXPECT_FALSE(defaults.layer);

  const nlohmann::json file = {{"preset", "llama-3.1-8b"}, {"method", "PAG"}, {"variant", "H"}, {"gamma", 1.5}};
  const auto from_file = resolve(file, nullptr, table);
  EXPECT_EQ(from_file.gamma, 1.5);  // file beats preset
  EXPECT_EQ(from_file.tau, 0.25);   // preset beats default
  EXPECT_EQ(from_file.layer, 25);

  const nlohmann::json flags = {{"gamma", 0.7}, {"layer", 3}, {"variant", "M"}};
  const auto both = resolve(file, flags, table);
  EXPECT_EQ(both.gamma, 0.7);
  EXPECT_EQ(both.layer, 3);
  EXPECT_EQ(both.tau, 0.5);  // M row of the preset, chosen by the flag's variant
}

TEST(Resolve, RejectsInvalidValues) {
  const auto table = load_presets();
  EXPECT_THROW(resolve({{"tau", 1.0}}, nullptr, table), InvalidArgument);
  EXPECT_THROW(resolve(nullptr, {{"method", "ICL"}}, table), InvalidArgument);
  EXPECT_THROW(resolve(nullptr, {{"ratio_grid", {0.0, 1.5}}}, table), InvalidArgument);
  EXPECT_THROW(resolve(nullptr, {{"max_new_tokens", 0}}, table), InvalidArgument);
}

TEST(Grid, MakeGrid) {
  const auto g = make_grid(0.0, 3.0, 0.2);
  ASSERT_EQ(g.size(), 16u);
  EXPECT_EQ(g[3], 0.6);
  EXPECT_EQ(g.back(), 3.0);
  const auto t = default_tau_grid();
  EXPECT_EQ(t.front(), 0.05);
  EXPECT_EQ(t.back(), 0.99);
  EXPECT_EQ(t.size(), 95u);
  EXPECT_THROW(make_grid(0, 1, 0), InvalidArgument);
}

TEST(Grid, SearchFindsArgmaxFirstOnTies) {
  const auto r = grid_search({0.0, 1.0}, {0.3, 0.6}, [](double g, double t) {
    if (g == 1.0 && t == 0.3) return 40.0;
    return 10.0;
  });
  EXPECT_EQ(r.cells.size(), 4u);
  EXPECT_EQ(r.best.gamma, 1.0);
  EXPECT_EQ(r.best.tau, 0.3);
  const auto tie = grid_search({0.0, 1.0}, {0.3, 0.6}, [](double, double) { return 5.0; });
  EXPECT_EQ(tie.best.gamma, 0.0);
  EXPECT_EQ(tie.best.tau, 0.3);
}
