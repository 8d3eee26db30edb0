# Laboratory services package
