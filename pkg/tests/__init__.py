# Tests package for dirac-scatter
