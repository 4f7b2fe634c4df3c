# This file allows the tests directory to be treated as a package.
