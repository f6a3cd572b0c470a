#pragma once

#include "jointmct/config.hpp"
#include "jointmct/contrasts.hpp"
#include "jointmct/csv.hpp"
#include "jointmct/dataset.hpp"
#include "jointmct/distributions.hpp"
#include "jointmct/error.hpp"
#include "jointmct/fixtures.hpp"
#include "jointmct/inference.hpp"
#include "jointmct/models.hpp"
#include "jointmct/mvt.hpp"
#include "jointmct/nonpar.hpp"
#include "jointmct/ols.hpp"
#include "jointmct/report.hpp"
#include "jointmct/simulate.hpp"
