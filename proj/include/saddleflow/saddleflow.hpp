#pragma once
// Umbrella header.

#include "saddleflow/errors.hpp"
#include "saddleflow/subspace.hpp"
#include "saddleflow/polynomial.hpp"
#include "saddleflow/rng.hpp"
#include "saddleflow/model.hpp"
#include "saddleflow/dynamics.hpp"
#include "saddleflow/analysis.hpp"
#include "saddleflow/harness.hpp"
#include "saddleflow/io.hpp"
#include "saddleflow/verify.hpp"
