// SPDX-License-Identifier: Apache-2.0
#pragma once

// Umbrella header.

#include "bolt/checkpoint.hpp"
#include "bolt/config.hpp"
#include "bolt/data/dataset.hpp"
#include "bolt/data/folder.hpp"
#include "bolt/data/image_io.hpp"
#include "bolt/ema.hpp"
#include "bolt/eval/compare.hpp"
#include "bolt/eval/finetune.hpp"
#include "bolt/eval/metrics.hpp"
#include "bolt/eval/probe.hpp"
#include "bolt/heads.hpp"
#include "bolt/losses.hpp"
#include "bolt/model.hpp"
#include "bolt/optim.hpp"
#include "bolt/patch_embed.hpp"
#include "bolt/perturb.hpp"
#include "bolt/trainer.hpp"
#include "bolt/vit.hpp"
