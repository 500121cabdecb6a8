#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "doctest.h"
#include "robustlab/config.hpp"
#include "robustlab/errors.hpp"
#include "robustlab/evalsweep.hpp"
#include "robustlab/training.hpp"
#include "testutil.hpp"

namespace rl = robustlab;

namespace {

const std::string kTmp = "/tmp/rl_config_";

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(bool(in));
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

int run_cli(const std::string& args, std::string* output = nullptr) {
    const std::string capture = kTmp + "cli_out.txt";
    const std::string cmd = std::string(ROBUSTLAB_CLI_PATH) + " " + args + " > " + capture +
                            " 2>&1";
    const int status = std::system(cmd.c_str());
    REQUIRE(status != -1);
    REQUIRE(WIFEXITED(status));
    if (output) *output = slurp(capture);
    return WEXITSTATUS(status);
}

}  // namespace

TEST_CASE("key = value grammar") {
    const std::string text =
        "# leading comment\n"
        "\n"
        "alpha = 1\n"
        "  beta=two words  # trailing comment\n"
        "gamma =  spaced   out  \n";
    auto kv = rl::parse_key_values(text);
    REQUIRE(kv.size() == 3);
    CHECK(kv.at("alpha") == "1");
    CHECK(kv.at("beta") == "two words");
    CHECK(kv.at("gamma") == "spaced   out");

    CHECK(rl::parse_key_values("").empty());
    CHECK(rl::parse_key_values("# only\n\n").empty());

    CHECK_THROWS_AS(rl::parse_key_values("a = 1\na = 2\n"), rl::ArgumentError);
    CHECK_THROWS_AS(rl::parse_key_values("just words\n"), rl::ArgumentError);
    CHECK_THROWS_AS(rl::parse_key_values("= 3\n"), rl::ArgumentError);
    CHECK_THROWS_AS(rl::parse_key_values("a =\n"), rl::ArgumentError);
    CHECK_THROWS_AS(rl::parse_key_values("a = # comment eats the value\n"), rl::ArgumentError);
    try {
        rl::parse_key_values("a = 1\nb = 2\nbroken line\n");
        FAIL("expected an ArgumentError");
    } catch (const rl::ArgumentError& e) {
        CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }
}

TEST_CASE("numbers accept a pixel-budget fraction form") {
    CHECK(rl::parse_fraction_value("eps", "8/255") == 8.0 / 255.0);
    CHECK(rl::parse_fraction_value("eps", "8 / 255") == 8.0 / 255.0);
    CHECK(rl::parse_fraction_value("eps", "0.25") == 0.25);
    CHECK(rl::parse_fraction_value("eps", "-3") == -3.0);
    CHECK_THROWS_AS(rl::parse_fraction_value("eps", "1/0"), rl::ArgumentError);
    CHECK_THROWS_AS(rl::parse_fraction_value("eps", "abc"), rl::ArgumentError);
    CHECK_THROWS_AS(rl::parse_fraction_value("eps", "2/x"), rl::ArgumentError);
    CHECK_THROWS_AS(rl::parse_fraction_value("eps", "0.25extra"), rl::ArgumentError);
}

TEST_CASE("config defaults follow the model kind") {
    auto linear = rl::parse_config_text("total_steps = 100\n");
    CHECK(linear.model == rl::Recipe::LinearKind);
    CHECK(linear.dataset == rl::Recipe::Mnist37);
    CHECK_FALSE(linear.expert_init);
    CHECK(linear.train.loss.kind == rl::LossFn::Kind::SoftplusBinary);
    CHECK_FALSE(linear.train.adv.has_value());

    auto conv = rl::parse_config_text("model = convnet\ndataset = cifar10\nepochs = 5\n");
    CHECK(conv.model == rl::Recipe::ConvNetKind);
    CHECK(conv.train.loss.kind == rl::LossFn::Kind::SoftmaxXent);

    auto forced = rl::parse_config_text("loss = softmax-xent\ntotal_steps = 10\n");
    CHECK(forced.train.loss.kind == rl::LossFn::Kind::SoftmaxXent);
}

TEST_CASE("config rejects unknown keys and bad enum values") {
    try {
        rl::parse_config_text("frobnicate = 1\ntotal_steps = 5\n");
        FAIL("expected an ArgumentError");
    } catch (const rl::ArgumentError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("frobnicate") != std::string::npos);
        CHECK(msg.find("adv_pgd_step_size") != std::string::npos);
        CHECK(msg.find("invariant_check_stride") != std::string::npos);
    }

    CHECK_THROWS_AS(rl::parse_config_text("model = quadratic\ntotal_steps = 5\n"),
                    rl::ArgumentError);
    CHECK_THROWS_AS(rl::parse_config_text("dataset = imagenet\ntotal_steps = 5\n"),
                    rl::ArgumentError);
    CHECK_THROWS_AS(rl::parse_config_text("optimizer = rmsprop\ntotal_steps = 5\n"),
                    rl::ArgumentError);
    CHECK_THROWS_AS(rl::parse_config_text("decay_norm = l3\ntotal_steps = 5\n"),
                    rl::ArgumentError);
    CHECK_THROWS_AS(rl::parse_config_text("adv_method = cw\ntotal_steps = 5\n"),
                    rl::ArgumentError);
    CHECK_THROWS_AS(rl::parse_config_text("adv_label_source = oracle\ntotal_steps = 5\n"),
                    rl::ArgumentError);
    CHECK_THROWS_AS(rl::parse_config_text("loss = mse\ntotal_steps = 5\n"), rl::ArgumentError);
    CHECK_THROWS_AS(rl::parse_config_text("expert_init = yes\ntotal_steps = 5\n"),
                    rl::ArgumentError);
    CHECK_THROWS_AS(rl::parse_config_text("seed = -1\ntotal_steps = 5\n"), rl::ArgumentError);

    // validation runs on the assembled config
    CHECK_THROWS_AS(rl::parse_config_text("lr = -1\ntotal_steps = 5\n"), rl::ArgumentError);
    CHECK_THROWS_AS(rl::parse_config_text("total_steps = 5\nepochs = 2\n"), rl::ArgumentError);
    CHECK_THROWS_AS(rl::parse_config_text(""), rl::ArgumentError);  // no step counter at all
    CHECK_THROWS_AS(
        rl::parse_config_text("model = convnet\nexpert_init = true\nepochs = 2\n"),
        rl::ArgumentError);
}

TEST_CASE("adversarial keys only arm when a method is chosen") {
    auto off = rl::parse_config_text("adv_method = none\nadv_eps = 0.25\ntotal_steps = 5\n");
    CHECK_FALSE(off.train.adv.has_value());

    auto on = rl::parse_config_text(
        "adv_method = fgsm\nadv_eps = 8/255\nadv_label_source = model-prediction\n"
        "total_steps = 5\n");
    REQUIRE(on.train.adv.has_value());
    CHECK(on.train.adv->method == rl::AdvMethod::FGSM);
    CHECK(on.train.adv->eps == 8.0 / 255.0);
    CHECK(on.train.adv->label_source == rl::LabelSource::ModelPrediction);

    auto pgd = rl::parse_config_text(
        "model = convnet\nepochs = 2\nadv_method = pgd\nadv_eps = 8/255\n"
        "adv_pgd_steps = 7\nadv_pgd_step_size = 2/255\nadv_delay_epochs = 50\n");
    REQUIRE(pgd.train.adv.has_value());
    CHECK(pgd.train.adv->pgd_steps == 7);
    CHECK(pgd.train.adv->pgd_step_size == 2.0 / 255.0);
    CHECK(pgd.train.adv->delay_epochs == 50);
}

TEST_CASE("every named recipe survives a text round trip") {
    const auto& all = rl::recipes();
    REQUIRE(all.size() == 12);
    for (const auto& r : all) {
        const auto cfg = rl::config_for_recipe(r);
        const std::string text = rl::config_to_text(cfg);
        const auto parsed = rl::parse_config_text(text);
        CHECK(rl::config_to_map(parsed) == rl::config_to_map(cfg));
        // and the rendering is stable once round-tripped
        CHECK(rl::config_to_text(parsed) == text);
    }

    const auto cnnpgd = rl::config_for_recipe(rl::find_recipe("cnn-pgd"));
    const auto back = rl::parse_config_text(rl::config_to_text(cnnpgd));
    REQUIRE(back.train.adv.has_value());
    CHECK(back.train.adv->eps == 8.0 / 255.0);
    CHECK(back.train.adv->pgd_step_size == 2.0 / 255.0);
    CHECK(back.train.loss.smoothing == 0.1);
    CHECK(back.model == rl::Recipe::ConvNetKind);

    const auto expert = rl::parse_config_text(
        rl::config_to_text(rl::config_for_recipe(rl::find_recipe("expert-l2"))));
    CHECK(expert.expert_init);
    CHECK(expert.train.decay.norm == rl::DecayNorm::L2);

    const std::string text = rl::config_to_text(cnnpgd);
    CHECK(text.find("model = convnet\n") != std::string::npos);
    CHECK(text.find("adv_method = pgd\n") != std::string::npos);
}

TEST_CASE("cli: usage, help, and recipe listing") {
    CHECK(run_cli("") == 2);
    CHECK(run_cli("--help") == 0);
    CHECK(run_cli("explode") == 2);
    CHECK(run_cli("train --frobnicate") == 2);
    CHECK(run_cli("train") == 2);  // --out is required

    std::string listing;
    CHECK(run_cli("list-recipes", &listing) == 0);
    CHECK(listing.find("baseline-natural") != std::string::npos);
    CHECK(listing.find("expert-l2") != std::string::npos);
    CHECK(listing.find("cnn-l2-pgd") != std::string::npos);

    const std::string out = kTmp + "nope.bin";
    CHECK(run_cli("train --recipe no-such-recipe --out " + out) == 2);
    CHECK(run_cli("train --recipe baseline-natural --steps 50 --out " + out +
                  " --data-dir /nonexistent_rl_data") == 3);
}

TEST_CASE("cli: train, attack, and sweep round trip on real data") {
    const std::string data = testutil::test_data_dir();
    const std::string m1 = kTmp + "m1.bin";

    // The model embeds the manifest digest, and the manifest records output
    // paths, so the determinism check must repeat the exact same command.
    std::string out;
    CHECK(run_cli("train --recipe baseline-natural --steps 300 --seed 5 --out " + m1 +
                      " --data-dir " + data,
                  &out) == 0);
    const std::string first = slurp(m1);
    CHECK(run_cli("train --recipe baseline-natural --steps 300 --seed 5 --out " + m1 +
                      " --data-dir " + data,
                  &out) == 0);
    CHECK(first == slurp(m1));  // same command, same bytes

    const std::string rows_csv = kTmp + "rows.csv";
    CHECK(run_cli("attack --model " + m1 + " --attack fgsm --eps 0.25 --n 60 --out " + rows_csv +
                      " --data-dir " + data,
                  &out) == 0);
    CHECK(out.find("attacked_accuracy=") != std::string::npos);
    auto rows = rl::attack_rows_from_csv(slurp(rows_csv));
    REQUIRE(rows.size() == 60);
    for (const auto& r : rows) {
        CHECK((r.label == 1 || r.label == -1));
        CHECK((r.prediction == 1 || r.prediction == -1));
        CHECK(r.success == (r.prediction != r.label));
        CHECK(r.l2_distortion_pct >= 0.0);
    }

    const std::string sweep_csv = kTmp + "sweep.csv";
    CHECK(run_cli("sweep --model " + m1 + " --attack fgsm --grid 0:0.2:0.1 --n 40 --out " +
                      sweep_csv + " --data-dir " + data,
                  &out) == 0);
    const std::string raw = slurp(sweep_csv);
    CHECK(raw.find("# manifest_digest=") != std::string::npos);
    auto curve = rl::sweep_from_csv(raw);
    CHECK(curve.attack == "fgsm");
    CHECK(curve.chance == 0.5);
    REQUIRE(curve.points.size() == 3);
    CHECK(curve.points[0].param == 0.0);
    CHECK(curve.points[2].param == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(curve.points[0].n == 40);
    for (std::size_t i = 1; i < 3; ++i)
        CHECK(curve.points[i].accuracy <= curve.points[i - 1].accuracy);
}
