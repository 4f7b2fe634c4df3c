# This file allows the data directory to be treated as a package.
