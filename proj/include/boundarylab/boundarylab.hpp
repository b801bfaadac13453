#pragma once

#include "boundarylab/core.hpp"
#include "boundarylab/data.hpp"
#include "boundarylab/classifiers.hpp"
#include "boundarylab/neural.hpp"
#include "boundarylab/model.hpp"
#include "boundarylab/attacks.hpp"
#include "boundarylab/theory.hpp"
#include "boundarylab/active.hpp"
