#ifndef DMT_DMT_HPP
#define DMT_DMT_HPP

// Umbrella header for the whole library.

#include "common.hpp"
#include "config.hpp"
#include "dataset.hpp"
#include "gradcheck.hpp"
#include "graph.hpp"
#include "losses.hpp"
#include "matrix.hpp"
#include "metrics.hpp"
#include "network.hpp"
#include "pca.hpp"
#include "rng.hpp"
#include "special.hpp"
#include "svg.hpp"
#include "trainer.hpp"

#endif
