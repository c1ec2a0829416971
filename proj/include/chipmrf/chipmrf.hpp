#ifndef CHIPMRF_CHIPMRF_HPP
#define CHIPMRF_CHIPMRF_HPP

#include "calling.hpp"
#include "chain.hpp"
#include "config.hpp"
#include "data.hpp"
#include "distributions.hpp"
#include "error.hpp"
#include "inference.hpp"
#include "io.hpp"
#include "mixture.hpp"
#include "model.hpp"
#include "random.hpp"
#include "simeval.hpp"

#endif
