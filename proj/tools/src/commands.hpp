#pragma once

#include <string>

#include "config.hpp"

namespace propattest::cli {

int cmd_synth(const Config& cfg);
int cmd_shadows(const Config& cfg);
int cmd_train_attestor(const Config& cfg);
int cmd_calibrate(const Config& cfg);
int cmd_attest(const Config& cfg);
int cmd_attack(const Config& cfg);
int cmd_defend(const Config& cfg);
int cmd_report(const Config& cfg);

}  // namespace propattest::cli
