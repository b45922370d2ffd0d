#include <gtest/gtest.h>

#include "eqcl/config.hpp"
#include "eqcl/errors.hpp"

using namespace eqcl;

TEST(Config, TemplateParsesBackUnchanged) {
    const std::string tmpl = emit_template();
    const LoadedConfig lc = parse_config(tmpl);
    EXPECT_TRUE(lc.defaulted.empty());
    EXPECT_EQ(save_config(lc.config), save_config(RunConfig{}));
    EXPECT_EQ(config_hash(lc.config), config_hash(RunConfig{}));
}

TEST(Config, CanonicalTextRoundTripsNonDefaults) {
    RunConfig c;
    c.data.classes = {"8PSK", "CPFSK"};
    c.data.snr_grid_db = {-10, 0.5, 18};
    c.data.random_phase = true;
    c.emd.sift_sd_threshold = 0.125;
    c.model.blocks = {{8, 7, 4}, {12, 3, 1}};
    c.pretrain.enabled_branches = {Branch::Emd, Branch::Ap};
    c.pretrain.temperature = 0.07;
    c.finetune.mode = FinetuneMode::LinearEval;
    c.finetune.lr = 3.3e-4;
    c.transfer.source_datasets = {"a.eqds", "b.eqds"};
    c.transfer.length_adapter = LengthAdapter::CropPad;
    c.paths.report_dir = "out/r";
    const std::string text = save_config(c);
    const RunConfig back = parse_config(text).config;
    EXPECT_EQ(save_config(back), text);
    EXPECT_EQ(back.model.blocks, c.model.blocks);
    EXPECT_EQ(back.pretrain.enabled_branches, c.pretrain.enabled_branches);
    EXPECT_EQ(back.data.snr_grid_db, c.data.snr_grid_db);
    EXPECT_EQ(back.finetune.lr, 3.3e-4);
    EXPECT_NE(config_hash(back), config_hash(RunConfig{}));
    EXPECT_EQ(config_hash(back).size(), 16u);
}

TEST(Config, UnknownKeyIsNamed) {
    try {
        parse_config("[pretrain]\ntempreture = 0.2\n");
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("pretrain.tempreture"), std::string::npos) << e.what();
    }
    EXPECT_THROW(parse_config("[pretraining]\n"), ConfigError);
}

TEST(Config, ParseErrorsCarryLineNumbers) {
    auto message = [](const std::string& text) {
        try {
            parse_config(text);
        } catch (const ConfigError& e) {
            return std::string(e.what());
        }
        return std::string();
    };
    EXPECT_NE(message("# c\n[data]\nlength 128\n").find("line 3"), std::string::npos);
    EXPECT_NE(message("epochs = 3\n").find("line 1"), std::string::npos);
    EXPECT_NE(message("[data]\n\nlength = abc\n").find("line 3"), std::string::npos);
    EXPECT_NE(message("[data]\nlength = 4\nlength = 5\n").find("duplicate"), std::string::npos);
    EXPECT_NE(message("[finetune]\nmode = probe\n").find("finetune.mode"), std::string::npos);
}

TEST(Config, OmittedKeysAreReportedWithDefaults) {
    const LoadedConfig lc = parse_config("[pretrain]\nepochs = 5 # short run\n");
    EXPECT_EQ(lc.config.pretrain.epochs, 5);
    EXPECT_EQ(lc.config.pretrain.temperature, 0.1);
    bool found = false;
    for (const auto& d : lc.defaulted) {
        EXPECT_EQ(d.find("pretrain.epochs"), std::string::npos);
        found = found || d == "pretrain.temperature = 0.1";
    }
    EXPECT_TRUE(found);
}

TEST(Config, HashTracksEveryKnob) {
    RunConfig a, b;
    b.ablate.seeds = 2;
    EXPECT_NE(config_hash(a), config_hash(b));
    EXPECT_EQ(config_hash(a), config_hash(RunConfig{}));
}
