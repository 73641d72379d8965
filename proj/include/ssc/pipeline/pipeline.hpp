#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "ssc/pipeline/config.hpp"

namespace ssc::pipeline {

/// Every stage reads its inputs from and writes its outputs under
/// config "out" (and "corpus.dir" when set). Stages are pure functions of
/// their inputs, the config and the seed, so run_all equals running the
/// stages by hand in the same order.
void gen_corpus(const Config& config);
/// Trains round `train.round` of one network: round 0 starts from a fresh
/// initialisation, later rounds continue from the previous round's
/// checkpoint with the mined regions of rounds 1..round added.
void train_cnn(const Config& config, int which);
/// Produces mined/<mine.net>_r<mine.round>.json from the previous round's
/// checkpoint applied to the training slides.
void mine(const Config& config);
void infer(const Config& config);
void features(const Config& config);
void train_rf(const Config& config);
void evaluate(const Config& config);
void run_all(const Config& config);

/// Paths shared by the stages.
std::filesystem::path out_dir(const Config& config);
std::filesystem::path corpus_dir(const Config& config);

/// Stable per-stage seed.
std::uint64_t stage_seed(std::uint64_t seed, const std::string& tag);

}  // namespace ssc::pipeline
