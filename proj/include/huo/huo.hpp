#pragma once

#include "huo/errors.hpp"
#include "huo/linalg.hpp"
#include "huo/rng.hpp"
#include "huo/spectral.hpp"
#include "huo/state.hpp"
#include "huo/models.hpp"
#include "huo/mub.hpp"
#include "huo/hub.hpp"
#include "huo/stats.hpp"
#include "huo/entropy.hpp"
#include "huo/equilibrium.hpp"
#include "huo/dynamics.hpp"
#include "huo/eth.hpp"
