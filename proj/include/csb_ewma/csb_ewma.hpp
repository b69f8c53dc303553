#ifndef CSB_EWMA_CSB_EWMA_HPP_
#define CSB_EWMA_CSB_EWMA_HPP_

#include "csb_ewma/chart.hpp"
#include "csb_ewma/distributions.hpp"
#include "csb_ewma/io.hpp"
#include "csb_ewma/optimizer.hpp"
#include "csb_ewma/random.hpp"
#include "csb_ewma/simulation.hpp"
#include "csb_ewma/validation.hpp"

#endif  // CSB_EWMA_CSB_EWMA_HPP_
