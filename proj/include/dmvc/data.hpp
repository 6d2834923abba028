#pragma once

#include "dmvc/data/csv.hpp"
#include "dmvc/data/dataset.hpp"
#include "dmvc/data/synth.hpp"
