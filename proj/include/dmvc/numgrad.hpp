#pragma once

#include "dmvc/numgrad/adam.hpp"
#include "dmvc/numgrad/archive.hpp"
#include "dmvc/numgrad/graph.hpp"
#include "dmvc/numgrad/param_store.hpp"
#include "dmvc/numgrad/tensor.hpp"
