# Policy strategies
