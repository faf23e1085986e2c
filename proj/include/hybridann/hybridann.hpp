#pragma once

#include "hybridann/alignment.hpp"
#include "hybridann/beam.hpp"
#include "hybridann/bench.hpp"
#include "hybridann/distance.hpp"
#include "hybridann/graph.hpp"
#include "hybridann/io.hpp"
#include "hybridann/oracle.hpp"
#include "hybridann/search.hpp"
#include "hybridann/store.hpp"
#include "hybridann/synthetic.hpp"
#include "hybridann/types.hpp"
