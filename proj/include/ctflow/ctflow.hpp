#pragma once

#include "detect.hpp"
#include "errors.hpp"
#include "flow.hpp"
#include "model.hpp"
#include "serialize.hpp"
#include "spectral.hpp"
