#pragma once

#include "reproguard/container.hpp"
#include "reproguard/entropy.hpp"
#include "reproguard/error.hpp"
#include "reproguard/hyperprior.hpp"
#include "reproguard/octree_codec.hpp"
#include "reproguard/parallel.hpp"
#include "reproguard/platform_sim.hpp"
#include "reproguard/ply.hpp"
#include "reproguard/quantizer.hpp"
#include "reproguard/raw_values.hpp"
#include "reproguard/safeguard.hpp"
