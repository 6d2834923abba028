#pragma once

#include "dmvc/training/config.hpp"
#include "dmvc/training/kmeans.hpp"
#include "dmvc/training/pretrain.hpp"
#include "dmvc/training/trainer.hpp"
