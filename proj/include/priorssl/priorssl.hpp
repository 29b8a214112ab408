#ifndef PRIORSSL_PRIORSSL_HPP
#define PRIORSSL_PRIORSSL_HPP

// Umbrella header for the whole library.

#include "priorssl/rng.hpp"
#include "priorssl/matrix.hpp"
#include "priorssl/datasets.hpp"
#include "priorssl/io.hpp"
#include "priorssl/kmeans.hpp"
#include "priorssl/active.hpp"
#include "priorssl/ppl.hpp"
#include "priorssl/mlp.hpp"
#include "priorssl/train.hpp"
#include "priorssl/config.hpp"
#include "priorssl/pipeline.hpp"

#endif
