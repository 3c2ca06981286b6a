#pragma once

#include "qoct/error.hpp"
#include "qoct/interferogram.hpp"
#include "qoct/io.hpp"
#include "qoct/morphology_ga.hpp"
#include "qoct/spectral.hpp"
#include "qoct/stack_model.hpp"
#include "qoct/units.hpp"
