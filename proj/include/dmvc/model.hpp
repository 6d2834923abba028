#pragma once

#include "dmvc/model/descriptor.hpp"
#include "dmvc/model/elbo.hpp"
#include "dmvc/model/model.hpp"
#include "dmvc/model/networks.hpp"
#include "dmvc/model/prior.hpp"
