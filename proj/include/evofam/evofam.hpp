#pragma once

#include "evofam/core.hpp"
#include "evofam/coefficients.hpp"
#include "evofam/config.hpp"
#include "evofam/linalg.hpp"
#include "evofam/parallel.hpp"
#include "evofam/report.hpp"
#include "evofam/probes.hpp"
#include "evofam/oscillator.hpp"
#include "evofam/fundsol.hpp"
#include "evofam/reduction.hpp"
#include "evofam/perturbation.hpp"
#include "evofam/verify.hpp"
