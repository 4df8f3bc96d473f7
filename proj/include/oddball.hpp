#ifndef ODDBALL_ODDBALL_HPP
#define ODDBALL_ODDBALL_HPP

#include "oddball/core_math.hpp"
#include "oddball/dissimilarity.hpp"
#include "oddball/glr.hpp"
#include "oddball/harness.hpp"
#include "oddball/io.hpp"
#include "oddball/lambda_solver.hpp"
#include "oddball/policy.hpp"
#include "oddball/random.hpp"

#endif  // ODDBALL_ODDBALL_HPP
