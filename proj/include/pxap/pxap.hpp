#pragma once

#include "pxap/convolution.hpp"
#include "pxap/exponents.hpp"
#include "pxap/funcspec.hpp"
#include "pxap/modular.hpp"
#include "pxap/operators.hpp"
#include "pxap/quadrature.hpp"
#include "pxap/specfun.hpp"
#include "pxap/stepanov.hpp"
