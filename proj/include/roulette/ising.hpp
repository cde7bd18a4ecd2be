#pragma once

#include "roulette/ising/exchange.hpp"
#include "roulette/ising/lattice.hpp"
#include "roulette/ising/partition.hpp"
#include "roulette/ising/samplers.hpp"
#include "roulette/ising/target.hpp"
