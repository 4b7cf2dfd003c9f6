# inference package
