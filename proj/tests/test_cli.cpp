// Copyright (C) 2026 The tinyyolo Authors
//
// SPDX-License-Identifier: Apache-2.0
//

#include <doctest.h>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "tinyyolo/cli.hpp"
#include "tinyyolo/serialization.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
    int code = 0;
    std::string out;
    std::string err;
};

Run cli(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    Run r;
    r.code = tinyyolo::cli::run(args, out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

std::string configs(const std::string& name) { return TINYYOLO_SOURCE_DIR "/configs/" + name; }

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("tinyyolo_cli_" + name);
    fs::remove_all(p);
    return p;
}

nlohmann::json read_json(const fs::path& p) {
    std::ifstream in(p);
    return nlohmann::json::parse(in);
}

}  // namespace

TEST_CASE("help, version and usage errors") {
    const Run help = cli({"--help"});
    CHECK(help.code == 0);
    for (const char* sub : {"dataset-gen", "train", "eval", "infer", "quantize", "export", "check-deploy", "profile"})
        CHECK(help.out.find(sub) != std::string::npos);

    const Run train_help = cli({"train", "--help"});
    CHECK(train_help.code == 0);
    CHECK(train_help.out.find("[epochs]") != std::string::npos);
    CHECK(train_help.out.find("--seed") != std::string::npos);

    CHECK(cli({"--version"}).code == 0);
    CHECK(cli({}).code == 1);
    const Run bogus = cli({"check-deploy", "--bogus"});
    CHECK(bogus.code == 1);
    CHECK_FALSE(bogus.err.empty());
    CHECK(cli({"eval", "--data", "/nonexistent.jsonl", "--checkpoint", "/nonexistent.tylo"}).code == 1);
}

TEST_CASE("check-deploy exit codes") {
    const Run ok = cli({"check-deploy", "--config", configs("tinyissimo-ref-88.cfg")});
    CHECK(ok.code == 0);
    CHECK(ok.out.find("PASS") != std::string::npos);
    const Run wide = cli({"check-deploy", "--config", configs("oversized-wide-fc.cfg")});
    CHECK(wide.code == 1);
    CHECK(wide.out.find("weight memory") != std::string::npos);
    const Run input = cli({"--config", configs("oversized-input-96.cfg"), "check-deploy"});
    CHECK(input.code == 1);
    CHECK(input.out.find("input size") != std::string::npos);
    CHECK(cli({"check-deploy", "--config", configs("tinyissimo-ref-88.cfg"), "--profile", "esp32"}).code != 0);
}

TEST_CASE("profile report from the fixture") {
    const fs::path dir = scratch("profile");
    const Run r = cli({"profile", "--measurements", TINYYOLO_SOURCE_DIR "/data/devices.csv", "--reference-macs",
                       "29425000", "--out", dir.string()});
    CHECK(r.code == 0);
    CHECK(r.out.find("65.3x") != std::string::npos);
    CHECK(r.out.find("107") != std::string::npos);
    CHECK(fs::exists(dir / "manifest.json"));
    const Run csv = cli({"profile", "--measurements", TINYYOLO_SOURCE_DIR "/data/devices.csv", "--format", "csv"});
    CHECK(csv.code == 0);
    CHECK(csv.out.find("MAX78000,") != std::string::npos);
    fs::remove_all(dir);
}

TEST_CASE("dataset-gen, train, export, eval, infer round trip") {
    const fs::path root = scratch("pipeline");
    const std::string data = (root / "data").string(), run = (root / "run").string();
    REQUIRE(cli({"dataset-gen", "--n", "24", "--seed", "3", "--out", data}).code == 0);
    const std::string ann = (root / "data" / "annotations.jsonl").string();
    CHECK(fs::exists(ann));

    const Run tr = cli({"train", "--data", ann, "--epochs-float", "1", "--epochs-qat", "1", "--batch-size", "8",
                        "--lr", "0.01", "--clip-grad-norm", "5", "--seed", "4", "--out", run});
    REQUIRE(tr.code == 0);
    for (const char* f : {"manifest.json", "train_log.csv", "final.tylo", "model.tylq"})
        CHECK(fs::exists(fs::path(run) / f));

    const nlohmann::json m = read_json(fs::path(run) / "manifest.json");
    CHECK(m["subcommand"] == "train");
    CHECK(m["seed"] == 4);
    CHECK(m["options"]["lr"] == "0.01");
    CHECK(m["model_params"] == 373840);
    CHECK(m.contains("libraries"));
    CHECK(m["command_line"].dump().find("--config") != std::string::npos);

    const std::string exported = (root / "export").string();
    REQUIRE(cli({"export", "--checkpoint", run + "/final.tylo", "--out", exported}).code == 0);
    CHECK(tinyyolo::read_file(exported + "/model.tylq") == tinyyolo::read_file(run + "/model.tylq"));

    const Run ev = cli({"eval", "--quantized", run + "/model.tylq", "--data", ann, "--max-objects", "1,2,inf", "--out",
                        (root / "eval").string()});
    CHECK(ev.code == 0);
    CHECK(ev.out.find("mAP") != std::string::npos);
    CHECK(fs::exists(root / "eval" / "eval_matrix.csv"));

    const Run inf = cli({"infer", "--checkpoint", run + "/final.tylo", "--image", data + "/images/000000.ppm"});
    CHECK(inf.code == 0);
    CHECK(nlohmann::json::parse(inf.out).contains("detections"));

    const Run bad_export = cli({"export", "--checkpoint", run + "/epoch_0001.tylo", "--out", exported});
    CHECK(bad_export.code != 0);
    fs::remove_all(root);
}
